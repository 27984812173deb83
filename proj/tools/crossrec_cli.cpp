// Command-line entry point: data preparation, topic fitting, offline
// training, streaming evaluation, ablations, gradient checks and synthetic
// data generation.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "crossrec/checkpoint.hpp"
#include "crossrec/config.hpp"
#include "crossrec/events.hpp"
#include "crossrec/metrics.hpp"
#include "crossrec/model.hpp"
#include "crossrec/online.hpp"
#include "crossrec/pipeline.hpp"
#include "crossrec/synth.hpp"
#include "crossrec/topics.hpp"
#include "crossrec/train.hpp"

namespace fs = std::filesystem;
using namespace crossrec;

namespace {

int log_level() {
  const char* env = std::getenv("CROSSREC_LOG");
  return env ? std::atoi(env) : 1;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << msg << '\n';
}

void add_config_flags(CLI::App* cmd, RunConfig& cfg, std::string& config_path) {
  cmd->add_option("--config", config_path, "flat key = value config file");
  cmd->add_option("--topics", cfg.topics, "number of topics K^t");
  cmd->add_option("--embed-dim", cfg.embed_dim, "embedding dimension k");
  cmd->add_option("--hidden", cfg.hidden, "hidden units h");
  cmd->add_option("--dropout", cfg.dropout, "dropout ratio");
  cmd->add_option("--lr", cfg.lr, "learning rate");
  cmd->add_option("--top-k", cfg.top_k, "recommendation list size K");
  cmd->add_option("--tau", cfg.tau, "time constant (seconds); <=0 = auto");
  cmd->add_option("--max-iters", cfg.max_iters, "online update iterations");
  cmd->add_option("--history-cap", cfg.history_cap, "attention history cap; 0 = unbounded");
  cmd->add_option("--epochs", cfg.epochs, "training epochs");
  cmd->add_option("--lda-iterations", cfg.lda_iterations, "Gibbs sweeps");
  cmd->add_option("--val-top-k", cfg.val_top_k, "validation list size");
  cmd->add_option("--num-windows", cfg.num_windows, "metric windows per run");
  cmd->add_option("--seed", cfg.seed, "rng seed");
  cmd->add_option("--variant", cfg.variant, "Full|NoHO|NoAt|NoTIF|CLSTM");
}

RunConfig resolve_config(CLI::App* cmd, const RunConfig& flag_values,
                         const std::string& config_path) {
  if (config_path.empty()) return flag_values;
  RunConfig cfg = load_config(config_path);
  // CLI flags win over file values.
  auto keep = [&](auto member, const char* flag) {
    if (cmd->count(flag)) cfg.*member = flag_values.*member;
  };
  keep(&RunConfig::topics, "--topics");
  keep(&RunConfig::embed_dim, "--embed-dim");
  keep(&RunConfig::hidden, "--hidden");
  keep(&RunConfig::dropout, "--dropout");
  keep(&RunConfig::lr, "--lr");
  keep(&RunConfig::top_k, "--top-k");
  keep(&RunConfig::tau, "--tau");
  keep(&RunConfig::max_iters, "--max-iters");
  keep(&RunConfig::history_cap, "--history-cap");
  keep(&RunConfig::epochs, "--epochs");
  keep(&RunConfig::lda_iterations, "--lda-iterations");
  keep(&RunConfig::val_top_k, "--val-top-k");
  keep(&RunConfig::num_windows, "--num-windows");
  keep(&RunConfig::seed, "--seed");
  keep(&RunConfig::variant, "--variant");
  return cfg;
}

struct LoadedData {
  DatasetSplit split;
  TopicModel topics;
  std::vector<UserSequence> sequences;
  ModelDims dims;
};

LoadedData load_data(const std::string& split_dir,
                     const std::string& topics_path, const RunConfig& cfg) {
  LoadedData data;
  data.split = load_split(split_dir);
  data.topics = load_topic_model(topics_path);
  data.sequences = build_sequences(data.split, data.topics);
  data.dims.topics = data.topics.num_topics;
  data.dims.embed = cfg.embed_dim;
  data.dims.hidden = cfg.hidden;
  data.dims.items = static_cast<int>(data.split.item_catalog.size());
  data.dims.users = static_cast<int>(data.sequences.size());
  return data;
}

TrainConfig to_train_config(const RunConfig& cfg) {
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.lr = cfg.lr;
  tc.dropout = cfg.dropout;
  tc.tau = cfg.tau;
  tc.clip_norm = cfg.clip_norm;
  tc.val_top_k = cfg.val_top_k;
  tc.truncate = cfg.truncate;
  tc.seed = cfg.seed;
  return tc;
}

void write_training_log(const std::string& path,
                        const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  out.precision(17);
  out << "epoch,train_loss,val_hr,val_ndcg\n";
  for (const auto& e : log)
    out << e.epoch << ',' << e.train_loss << ',' << e.val_hr << ','
        << e.val_ndcg << '\n';
}

void run_one_stream(const LoadedData& data, const ModelFile& model,
                    const RunConfig& cfg, StreamIterator::Part part,
                    const std::string& out_dir, const std::string& variant) {
  OnlinePolicy policy;
  policy.max_iters = cfg.max_iters;
  policy.top_k_size = cfg.top_k;
  policy.history_cap = cfg.history_cap;

  OnlineSession session(model.params, model.opt, model.tau, data.topics,
                        data.split.item_catalog, model.users, policy);
  StreamOutcome outcome =
      run_stream(data.split, data.topics, data.sequences, model.params,
                 model.opt, model.tau, part, policy, &session);

  const auto features = item_topic_features(
      data.sequences, data.dims.context(), data.dims.items);
  const auto popularity = item_popularity(data.split);
  const StreamSummary summary =
      summarize(outcome.events, features, popularity, variant, cfg.seed,
                cfg.num_windows);

  write_event_csv(out_dir + "/events.csv", outcome.events);
  write_metric_csv(out_dir + "/metrics.csv", summary.windows,
                   summary.cumulative);
  write_trail_csv(out_dir + "/trail.csv", variant, outcome.events);
  session.snapshot(out_dir + "/session.ckpt");
  for (const auto& w : outcome.warnings) info("warning: " + w);
  info(variant + ": HR@" + std::to_string(cfg.top_k) + " = " +
       std::to_string(summary.cumulative.hr) + ", NDCG = " +
       std::to_string(summary.cumulative.ndcg) + " over " +
       std::to_string(summary.cumulative.events) + " events");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"online cross-network recommendation engine"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic event log");
  SynthConfig synth_cfg;
  std::string synth_out = "synthetic.log";
  synth_cmd->add_option("--out", synth_out, "output event log");
  synth_cmd->add_option("--users", synth_cfg.users);
  synth_cmd->add_option("--items", synth_cfg.items);
  synth_cmd->add_option("--synth-topics", synth_cfg.topics);
  synth_cmd->add_option("--events-per-user", synth_cfg.events_per_user);
  synth_cmd->add_option("--support-size", synth_cfg.support_size);
  synth_cmd->add_flag("--drift", synth_cfg.drift, "enable midpoint preference drift");
  synth_cmd->add_option("--seed", synth_cfg.seed);

  // prepare
  auto* prepare_cmd = app.add_subcommand("prepare", "parse, filter and split an event log");
  std::string prepare_in, prepare_out;
  int min_src_a = 0, min_src_b = 0, min_target = 0;
  prepare_cmd->add_option("--input", prepare_in)->required();
  prepare_cmd->add_option("--out-dir", prepare_out)->required();
  prepare_cmd->add_option("--min-src-a", min_src_a);
  prepare_cmd->add_option("--min-src-b", min_src_b);
  prepare_cmd->add_option("--min-target", min_target);

  // topics
  auto* topics_cmd = app.add_subcommand("topics", "fit or import the topic model");
  std::string topics_split, topics_out, topics_import;
  topics_cmd->add_option("--split-dir", topics_split);
  topics_cmd->add_option("--out", topics_out)->required();
  topics_cmd->add_option("--import", topics_import,
                         "existing topic model checkpoint to copy");
  add_config_flags(topics_cmd, cfg, config_path);

  // train
  auto* train_cmd = app.add_subcommand("train", "offline training");
  std::string train_split, train_topics, train_out;
  train_cmd->add_option("--split-dir", train_split)->required();
  train_cmd->add_option("--topics-model", train_topics)->required();
  train_cmd->add_option("--out-dir", train_out)->required();
  add_config_flags(train_cmd, cfg, config_path);

  // stream
  auto* stream_cmd = app.add_subcommand("stream", "online predict-then-update replay");
  std::string stream_split, stream_topics, stream_model, stream_out, stream_part = "test";
  stream_cmd->add_option("--split-dir", stream_split)->required();
  stream_cmd->add_option("--topics-model", stream_topics)->required();
  stream_cmd->add_option("--model", stream_model)->required();
  stream_cmd->add_option("--out-dir", stream_out)->required();
  stream_cmd->add_option("--part", stream_part, "validation|test");
  add_config_flags(stream_cmd, cfg, config_path);

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "train and stream all variants");
  std::string ablate_split, ablate_topics, ablate_out;
  ablate_cmd->add_option("--split-dir", ablate_split)->required();
  ablate_cmd->add_option("--topics-model", ablate_topics)->required();
  ablate_cmd->add_option("--out-dir", ablate_out)->required();
  add_config_flags(ablate_cmd, cfg, config_path);

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
  int grad_models = 5;
  grad_cmd->add_option("--models", grad_models, "number of random tiny models");
  add_config_flags(grad_cmd, cfg, config_path);

  // report
  auto* report_cmd = app.add_subcommand("report", "merge metric CSVs");
  std::vector<std::string> report_inputs;
  std::string report_out;
  report_cmd->add_option("--out", report_out)->required();
  report_cmd->add_option("inputs", report_inputs)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      write_event_log(synth_out, generate_synthetic(synth_cfg));
      info("wrote " + synth_out);
      return 0;
    }

    if (*prepare_cmd) {
      fs::create_directories(prepare_out);
      auto events = parse_event_log(prepare_in);
      events = filter_sparse(events, min_src_a, min_src_b, min_target);
      const DatasetSplit split = chronological_split(events);
      save_split(prepare_out, split);
      for (const auto& uid : split.skipped_users)
        info("warning: user with no target events skipped: " + uid);
      info("split written to " + prepare_out + " (" +
           std::to_string(split.item_catalog.size()) + " items, " +
           std::to_string(split.train.size()) + " users)");
      return 0;
    }

    if (*topics_cmd) {
      const RunConfig run = resolve_config(topics_cmd, cfg, config_path);
      if (!topics_import.empty()) {
        save_topic_model(topics_out, load_topic_model(topics_import));
      } else {
        if (topics_split.empty())
          throw CLI::ValidationError("topics", "--split-dir or --import required");
        const DatasetSplit split = load_split(topics_split);
        const TopicModel model =
            fit_lda(training_corpus(split), run.topics, 0, 0,
                    run.lda_iterations, run.seed);
        save_topic_model(topics_out, model);
      }
      write_config_echo(topics_out + ".config", run);
      info("wrote " + topics_out);
      return 0;
    }

    if (*train_cmd) {
      const RunConfig run = resolve_config(train_cmd, cfg, config_path);
      fs::create_directories(train_out);
      const LoadedData data = load_data(train_split, train_topics, run);
      const TrainResult result =
          train_offline(data.dims, parse_variant(run.variant), data.sequences,
                        to_train_config(run));
      std::vector<std::string> user_ids;
      for (const auto& s : data.sequences) user_ids.push_back(s.user_id);
      save_model(train_out + "/model.ckpt", result.params, result.opt,
                 result.tau, data.split.item_catalog, user_ids);
      write_training_log(train_out + "/training_log.csv", result.log);
      write_config_echo(train_out + "/config.echo", run);
      info("trained " + run.variant + "; final val HR@" +
           std::to_string(run.val_top_k) + " = " +
           std::to_string(result.log.back().val_hr));
      return 0;
    }

    if (*stream_cmd) {
      const RunConfig run = resolve_config(stream_cmd, cfg, config_path);
      fs::create_directories(stream_out);
      const LoadedData data = load_data(stream_split, stream_topics, run);
      const ModelFile model = load_model(stream_model);
      const auto part = stream_part == "validation"
                            ? StreamIterator::Part::Validation
                            : StreamIterator::Part::Test;
      if (stream_part != "validation" && stream_part != "test")
        throw CLI::ValidationError("stream", "--part must be validation or test");
      run_one_stream(data, model, run, part, stream_out, run.variant);
      write_config_echo(stream_out + "/config.echo", run);
      return 0;
    }

    if (*ablate_cmd) {
      const RunConfig base = resolve_config(ablate_cmd, cfg, config_path);
      fs::create_directories(ablate_out);
      const LoadedData data = load_data(ablate_split, ablate_topics, base);
      for (Variant v : {Variant::Full, Variant::NoHO, Variant::NoAt,
                        Variant::NoTIF, Variant::CLSTM}) {
        RunConfig run = base;
        run.variant = variant_name(v);
        const std::string dir = ablate_out + "/" + run.variant;
        fs::create_directories(dir);
        const TrainResult result = train_offline(
            data.dims, v, data.sequences, to_train_config(run));
        std::vector<std::string> user_ids;
        for (const auto& s : data.sequences) user_ids.push_back(s.user_id);
        save_model(dir + "/model.ckpt", result.params, result.opt, result.tau,
                   data.split.item_catalog, user_ids);
        write_training_log(dir + "/training_log.csv", result.log);
        ModelFile model{result.params, result.opt, result.tau,
                        data.split.item_catalog, user_ids};
        run_one_stream(data, model, run, StreamIterator::Part::Test, dir,
                       run.variant);
        write_config_echo(dir + "/config.echo", run);
      }
      return 0;
    }

    if (*grad_cmd) {
      const RunConfig run = resolve_config(grad_cmd, cfg, config_path);
      std::mt19937_64 rng(run.seed);
      double worst = 0.0;
      for (int m = 0; m < grad_models; ++m) {
        ModelDims dims;
        dims.topics = 3;
        dims.embed = std::min(run.embed_dim, 4);
        dims.hidden = std::min(run.hidden, 8);
        dims.items = 6;
        dims.users = 3;
        ParameterSet params(dims, parse_variant(run.variant));
        params.init_random(rng());

        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<StepInput> inputs;
        std::vector<int> targets;
        const int steps = 3;
        for (int s = 0; s < steps; ++s) {
          StepInput in;
          in.x = Eigen::VectorXd::Zero(dims.context());
          for (int i = 0; i < dims.context(); ++i)
            if (unit(rng) < 0.5) in.x[i] = unit(rng);
          in.delta_t = s == 0 ? -1.0 : 3600.0 * (1 + unit(rng));
          in.user = m % dims.users;
          inputs.push_back(in);
          targets.push_back(static_cast<int>(unit(rng) * dims.items));
        }
        const FdReport report =
            finite_difference_check(params, inputs, targets, 7200.0);
        worst = std::max(worst, report.max_rel_err);
      }
      std::cout.precision(6);
      std::cout << "max relative error: " << worst << " over " << grad_models
                << " models\n";
      return worst <= 1e-4 ? 0 : 1;
    }

    if (*report_cmd) {
      std::ofstream out(report_out);
      if (!out) throw std::runtime_error("cannot write " + report_out);
      bool header_done = false;
      for (const auto& input : report_inputs) {
        std::ifstream in(input);
        if (!in) throw std::runtime_error("cannot open " + input);
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
          if (first) {
            first = false;
            if (header_done) continue;
            header_done = true;
          }
          out << line << '\n';
        }
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
