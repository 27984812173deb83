#include "crossrec/interaction.hpp"

#include <stdexcept>

namespace crossrec {

std::vector<std::pair<int, double>> nonzero_entries(
    const Eigen::Ref<const Eigen::VectorXd>& x) {
  std::vector<std::pair<int, double>> out;
  for (int i = 0; i < x.size(); ++i)
    if (x[i] != 0.0) out.emplace_back(i, x[i]);
  return out;
}

Eigen::MatrixXd first_order_columns(const ParameterSet& params,
                                    const Eigen::VectorXd& x, int user) {
  const ModelDims& dims = params.dims();
  if (x.size() != dims.context())
    throw std::invalid_argument("context vector has wrong length");
  if (user < 0 || user >= params.user_embed().cols())
    throw std::out_of_range("unknown user index");

  const auto active_a = nonzero_entries(x.head(dims.topics));
  const auto active_b = nonzero_entries(x.tail(dims.topics));

  Eigen::MatrixXd e1(dims.embed, active_a.size() + active_b.size() + 1);
  int col = 0;
  for (const auto& [c, w] : active_a)
    e1.col(col++) = w * params.topic_embed_a().col(c);
  for (const auto& [c, w] : active_b)
    e1.col(col++) = w * params.topic_embed_b().col(c);
  e1.col(col) = params.user_embed().col(user);
  return e1;
}

Eigen::MatrixXd pairwise_products(const Eigen::MatrixXd& e1) {
  const int n = static_cast<int>(e1.cols());
  if (n < 1) throw std::invalid_argument("E_1 must have at least one column");
  Eigen::MatrixXd e2(e1.rows(), std::ptrdiff_t{n} * (n - 1) / 2);
  int col = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      e2.col(col++) = e1.col(i).cwiseProduct(e1.col(j));
  return e2;
}

Eigen::VectorXd sum_pool(const Eigen::MatrixXd& e1, const Eigen::MatrixXd& e2) {
  if (e1.cols() == 0 && e2.cols() == 0)
    return Eigen::VectorXd::Zero(e1.rows());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(e1.rows());
  if (e1.cols() > 0) out += e1.rowwise().sum();
  if (e2.cols() > 0) out += e2.rowwise().sum();
  return out;
}

Eigen::VectorXd pooled_input(const ParameterSet& params, const Eigen::VectorXd& x,
                             int user, bool higher_order,
                             Eigen::VectorXd& col_sum,
                             std::vector<std::pair<int, double>>& active_a,
                             std::vector<std::pair<int, double>>& active_b) {
  const ModelDims& dims = params.dims();
  if (x.size() != dims.context())
    throw std::invalid_argument("context vector has wrong length");
  if (user < 0 || user >= params.user_embed().cols())
    throw std::out_of_range("unknown user index");

  active_a = nonzero_entries(x.head(dims.topics));
  active_b = nonzero_entries(x.tail(dims.topics));

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dims.embed);
  Eigen::VectorXd sq_sum = Eigen::VectorXd::Zero(dims.embed);
  auto accumulate = [&](const Eigen::VectorXd& col) {
    sum += col;
    sq_sum += col.cwiseProduct(col);
  };
  for (const auto& [c, w] : active_a)
    accumulate(w * params.topic_embed_a().col(c));
  for (const auto& [c, w] : active_b)
    accumulate(w * params.topic_embed_b().col(c));
  accumulate(params.user_embed().col(user));

  col_sum = sum;
  if (!higher_order) return sum;
  return sum + 0.5 * (sum.cwiseProduct(sum) - sq_sum);
}

double fm_pairwise_oracle(const std::vector<std::pair<int, double>>& features,
                          const Eigen::MatrixXd& factors) {
  double total = 0.0;
  for (std::size_t a = 0; a < features.size(); ++a)
    for (std::size_t b = a + 1; b < features.size(); ++b) {
      const auto& [i, xi] = features[a];
      const auto& [j, xj] = features[b];
      total += factors.col(i).dot(factors.col(j)) * xi * xj;
    }
  return total;
}

}  // namespace crossrec
