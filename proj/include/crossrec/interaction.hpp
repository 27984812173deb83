#pragma once

#include <Eigen/Dense>
#include <vector>

#include "crossrec/model.hpp"

namespace crossrec {

// Nonzero entries of one half of the context vector, as (topic, weight).
std::vector<std::pair<int, double>> nonzero_entries(
    const Eigen::Ref<const Eigen::VectorXd>& x);

// E_1^t: one scaled topic-embedding column per nonzero context entry
// (SourceA first, then SourceB, each in ascending topic order) plus the user
// column last. Throws on an unknown user index.
Eigen::MatrixXd first_order_columns(const ParameterSet& params,
                                    const Eigen::VectorXd& x, int user);

// E_2^t: element-wise products e_i . e_j for all unordered pairs i < j,
// columns ordered lexicographically over (i, j).
Eigen::MatrixXd pairwise_products(const Eigen::MatrixXd& e1);

// Componentwise sum over all columns of (E_1 | E_2).
Eigen::VectorXd sum_pool(const Eigen::MatrixXd& e1, const Eigen::MatrixXd& e2);

// Production path: pooled input via the squared-sum identity,
//   second-order block = 0.5 * ((sum_j e_j)^2 - sum_j e_j^2)  (elementwise).
// col_sum receives S = sum_j e_j, needed by the backward pass. With
// higher_order false only the first-order sum is pooled.
Eigen::VectorXd pooled_input(const ParameterSet& params, const Eigen::VectorXd& x,
                             int user, bool higher_order,
                             Eigen::VectorXd& col_sum,
                             std::vector<std::pair<int, double>>& active_a,
                             std::vector<std::pair<int, double>>& active_b);

// Reference oracle for the FM second-order term: explicit double loop over
// feature pairs, sum_{i<j} <v_i, v_j> x_i x_j.
double fm_pairwise_oracle(const std::vector<std::pair<int, double>>& features,
                          const Eigen::MatrixXd& factors /* k x n, column per feature */);

}  // namespace crossrec
