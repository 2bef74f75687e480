// appealnet: train a two-head small network against a big model and
// simulate threshold-based edge/cloud routing over synthetic datasets.
//
// Subcommands: pretrain, train, eval, sweep, histogram, profile.
// Exit codes: 0 success, 1 usage/config error, 2 runtime/numeric error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <json.hpp>

#include "appealnet/collab.hpp"
#include "appealnet/config.hpp"
#include "appealnet/format.hpp"
#include "appealnet/rng.hpp"
#include "appealnet/trainer.hpp"

namespace fs = std::filesystem;
using namespace appealnet;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

struct Run {
  RunConfig cfg;
  std::string hash;
  fs::path out;
  Dataset train;
  Dataset test;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Path to the run config (JSON)")
      ->required();
  cmd->add_option("--seed", flags.seed, "Override the config seed");
  cmd->add_option("--out", flags.out_dir, "Override the output directory");
}

Run prepare(const CommonFlags& flags, bool need_dataset) {
  Run run;
  run.cfg = load_run_config(flags.config_path);
  if (flags.seed) {
    run.cfg.seed = *flags.seed;
    run.cfg.pretrain.seed = *flags.seed;
    run.cfg.train.seed = *flags.seed;
  }
  if (flags.out_dir) run.cfg.out_dir = *flags.out_dir;
  run.hash = config_hash(run.cfg);
  run.out = fs::path(run.cfg.out_dir);
  fs::create_directories(run.out);
  {
    std::ofstream resolved(run.out / "resolved_config.json");
    resolved << resolved_config_json(run.cfg);
  }
  if (need_dataset) {
    auto [train, test] = build_dataset(run.cfg);
    run.train = std::move(train);
    run.test = std::move(test);
  }
  return run;
}

ApproximatorNet load_pretrained_checked(const Run& run, const std::string& path,
                                        const ArchSpec& expected) {
  auto net = load_approximator(path);
  if (!(net.spec() == expected)) {
    throw std::runtime_error("checkpoint " + path + " holds arch [" +
                             net.spec().describe() +
                             "] but the config resolves to [" +
                             expected.describe() + "]");
  }
  (void)run;
  return net;
}

BigModel build_big_model(const Run& run, const std::string& big_ckpt_flag) {
  if (run.cfg.big.oracle) return BigModel::oracle();
  std::string path = !big_ckpt_flag.empty() ? big_ckpt_flag : run.cfg.big.checkpoint;
  if (path.empty()) {
    throw ConfigError(
        "white-box mode needs a big checkpoint (big.checkpoint in the config "
        "or --big-checkpoint)");
  }
  ArchSpec expected = build_big_arch(run.cfg, run.train);
  return BigModel::white_box(load_pretrained_checked(run, path, expected));
}

std::vector<double> mapped_grid(const std::vector<double>& scores,
                                std::size_t points) {
  auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  double lo = *lo_it, hi = *hi_it;
  double span = hi - lo;
  double pad = span > 0.0 && points > 1
                   ? span / static_cast<double>(points - 1)
                   : 1e-9;
  std::vector<double> grid;
  grid.reserve(points);
  for (std::size_t i = 0; i + 1 < points; ++i) {
    grid.push_back(lo + span * static_cast<double>(i) /
                            static_cast<double>(points > 2 ? points - 2 : 1));
  }
  grid.push_back(hi + pad);
  return grid;
}

int cmd_pretrain(const CommonFlags& flags, const std::string& target_flag) {
  Run run = prepare(flags, true);
  std::string target = target_flag.empty() ? run.cfg.pretrain_target : target_flag;
  ArchSpec arch = target == "big" ? build_big_arch(run.cfg, run.train)
                                  : build_small_arch(run.cfg, run.train);
  auto [net, log] = pretrain_approximator(arch, run.train, run.test, run.cfg.pretrain);
  fs::path ckpt = run.out / ("checkpoint_pretrain_" + target + ".json");
  save_checkpoint(net, ckpt.string());
  write_train_log_csv(log, (run.out / "pretrain_log.csv").string());
  write_train_log_json(log, (run.out / "pretrain_log.json").string(), run.hash,
                       run.cfg.seed);
  double acc_train = log.epochs.empty() ? 0.0 : log.epochs.back().acc_train;
  double acc_test = log.epochs.empty() ? 0.0 : log.epochs.back().acc_test;
  std::cout << "pretrained " << target << " net [" << arch.describe() << "]\n"
            << "  train acc " << format_double(acc_train) << "  test acc "
            << format_double(acc_test) << "\n"
            << "  checkpoint " << ckpt.string() << "\n";
  return 0;
}

int cmd_train(const CommonFlags& flags, const std::string& pretrained_flag,
              const std::string& big_ckpt_flag) {
  Run run = prepare(flags, true);
  std::string pre_path = !pretrained_flag.empty() ? pretrained_flag
                                                  : run.cfg.pretrained_checkpoint;
  if (pre_path.empty()) {
    throw ConfigError(
        "train needs a pretrained checkpoint (pretrained_checkpoint in the "
        "config or --pretrained)");
  }
  ArchSpec small = build_small_arch(run.cfg, run.train);
  auto pretrained = load_pretrained_checked(run, pre_path, small);
  auto net = insert_predictor_head(pretrained, derive_seed(run.cfg.seed, 0x9ead));
  BigModel big = build_big_model(run, big_ckpt_flag);

  auto [trained, log] = joint_train(std::move(net), big, run.train, run.test,
                                    run.cfg.train);
  fs::path ckpt = run.out / "checkpoint_twohead.json";
  save_checkpoint(trained, ckpt.string());
  write_train_log_csv(log, (run.out / "train_log.csv").string());
  write_train_log_json(log, (run.out / "train_log.json").string(), run.hash,
                       run.cfg.seed);
  const auto& last = log.epochs.back();
  std::cout << "joint training finished ("
            << (run.cfg.big.oracle ? "black-box" : "white-box") << ", "
            << log.epochs.size() << " epochs)\n"
            << "  final mean_lq " << format_double(last.mean_lq) << "  beta "
            << format_double(last.beta) << "  mean_q "
            << format_double(last.mean_q) << "\n"
            << "  approx acc train " << format_double(last.acc_train)
            << "  test " << format_double(last.acc_test) << "\n"
            << "  checkpoint " << ckpt.string() << "\n";
  return 0;
}

TwoHeadNet load_two_head_for(const Run& run, const std::string& ckpt_flag) {
  std::string path = !ckpt_flag.empty() ? ckpt_flag : run.cfg.checkpoint;
  if (path.empty()) {
    throw ConfigError(
        "this command needs a two-head checkpoint (checkpoint in the config "
        "or --checkpoint)");
  }
  auto net = load_two_head(path);
  ArchSpec expected = build_small_arch(run.cfg, run.train);
  if (!(net.spec() == expected)) {
    throw std::runtime_error("checkpoint " + path + " holds arch [" +
                             net.spec().describe() +
                             "] but the config resolves to [" +
                             expected.describe() + "]");
  }
  return net;
}

CostModel cost_for(const Run& run) {
  ArchSpec small = build_small_arch(run.cfg, run.train);
  if (run.cfg.big.oracle) {
    return build_cost_model(run.cfg, small, nullptr);
  }
  ArchSpec big = build_big_arch(run.cfg, run.train);
  return build_cost_model(run.cfg, small, &big);
}

void print_report(const EvalReport& r, const std::string& source) {
  std::cout << "source " << source << "  delta " << format_double(r.delta)
            << "  SR " << format_double(r.sr) << "  AR " << format_double(r.ar)
            << "\n  overall acc " << format_double(r.overall_accuracy)
            << " (small " << format_double(r.acc_small) << ", big "
            << format_double(r.acc_big) << ")  AD " << format_double(r.ad)
            << "  AccI "
            << (r.acc_i ? format_double(*r.acc_i) : std::string("undefined"))
            << "\n  overall cost " << format_double(r.cost) << " over "
            << r.n_samples << " samples\n";
}

int cmd_eval(const CommonFlags& flags, const std::string& ckpt_flag,
             const std::string& big_ckpt_flag, std::optional<double> delta_flag,
             const std::string& source_flag) {
  Run run = prepare(flags, true);
  auto net = load_two_head_for(run, ckpt_flag);
  CostModel cost = cost_for(run);
  RoutingPolicy policy{run.cfg.eval.source, run.cfg.eval.delta};
  if (delta_flag) policy.delta = *delta_flag;
  if (!source_flag.empty()) policy.source = score_source_from_string(source_flag);

  EvalReport report;
  if (run.test.task == TaskKind::Regression) {
    report = evaluate_regression(net, run.test, run.cfg.err_threshold, policy, cost);
  } else {
    BigModel big = build_big_model(run, big_ckpt_flag);
    report = evaluate(net, big, run.test, policy, cost);
  }
  print_report(report, to_string(policy.source));
  write_reports_csv({report}, {to_string(policy.source)},
                    (run.out / "eval_report.csv").string(), run.hash,
                    run.cfg.seed);
  write_reports_json({report}, {to_string(policy.source)},
                     (run.out / "eval_report.json").string(), run.hash,
                     run.cfg.seed);
  return 0;
}

int cmd_sweep(const CommonFlags& flags, const std::string& ckpt_flag,
              const std::string& big_ckpt_flag) {
  Run run = prepare(flags, true);
  auto net = load_two_head_for(run, ckpt_flag);
  CostModel cost = cost_for(run);

  std::vector<EvalReport> reports;
  std::vector<std::string> tags;
  if (run.test.task == TaskKind::Regression) {
    for (double delta : run.cfg.sweep.deltas) {
      reports.push_back(evaluate_regression(
          net, run.test, run.cfg.err_threshold,
          RoutingPolicy{ScoreSource::PredictorQ, delta}, cost));
      tags.push_back("q");
    }
  } else {
    BigModel big = build_big_model(run, big_ckpt_flag);
    for (ScoreSource source :
         {ScoreSource::PredictorQ, ScoreSource::Msp, ScoreSource::ScoreMargin,
          ScoreSource::Entropy}) {
      // the config grid applies to q; baselines live on their own scales and
      // get the same number of points mapped onto their empirical range
      std::vector<double> deltas =
          source == ScoreSource::PredictorQ
              ? run.cfg.sweep.deltas
              : mapped_grid(routing_scores(net, run.test, source),
                            run.cfg.sweep.deltas.size());
      for (auto& r : sweep_thresholds(net, big, run.test, source, cost, deltas)) {
        reports.push_back(r);
        tags.push_back(to_string(source));
      }
    }
  }
  write_reports_csv(reports, tags, (run.out / "sweep.csv").string(), run.hash,
                    run.cfg.seed);
  write_reports_json(reports, tags, (run.out / "sweep.json").string(), run.hash,
                     run.cfg.seed);
  std::cout << "sweep wrote " << reports.size() << " rows to "
            << (run.out / "sweep.csv").string() << "\n";
  return 0;
}

int cmd_histogram(const CommonFlags& flags, const std::string& ckpt_flag,
                  const std::string& source_flag,
                  std::optional<std::size_t> bins_flag) {
  Run run = prepare(flags, true);
  if (run.test.task == TaskKind::Regression) {
    throw ConfigError("histogram needs a classification dataset");
  }
  auto net = load_two_head_for(run, ckpt_flag);
  ScoreSource source = source_flag.empty()
                           ? run.cfg.histogram.source
                           : score_source_from_string(source_flag);
  std::size_t bins = bins_flag ? *bins_flag : run.cfg.histogram.bins;

  auto hist = score_histogram(net, run.test, source, bins);
  write_histogram_csv(hist, (run.out / "histogram.csv").string(), run.hash,
                      run.cfg.seed);

  // split the same scores by small-net correctness for the separation number
  auto scores = routing_scores(net, run.test, source);
  auto outs = net.infer(run.test.features, run.test.n, run.test.d);
  std::vector<double> correct, incorrect;
  for (std::size_t i = 0; i < run.test.n; ++i) {
    std::span<const double> row{outs.probs.data() + i * outs.k, outs.k};
    std::size_t best = 0;
    for (std::size_t j = 1; j < outs.k; ++j) {
      if (row[j] > row[best]) best = j;
    }
    if (best == static_cast<std::size_t>(run.test.labels[i])) {
      correct.push_back(scores[i]);
    } else {
      incorrect.push_back(scores[i]);
    }
  }
  double auc = (correct.empty() || incorrect.empty())
                   ? std::numeric_limits<double>::quiet_NaN()
                   : auroc(correct, incorrect);

  nlohmann::json summary{{"config_hash", run.hash},
                         {"seed", run.cfg.seed},
                         {"source", to_string(source)},
                         {"bins", bins},
                         {"n_correct", correct.size()},
                         {"n_incorrect", incorrect.size()},
                         {"auroc", auc}};
  std::ofstream sum_out(run.out / "histogram_summary.json");
  sum_out << summary.dump(2) << "\n";

  std::cout << "histogram (" << to_string(source) << ", " << bins
            << " bins) written to " << (run.out / "histogram.csv").string()
            << "\nauroc " << format_double(auc) << " (" << correct.size()
            << " correct vs " << incorrect.size() << " incorrect)\n";
  return 0;
}

int cmd_profile(const CommonFlags& flags, std::optional<std::uint64_t> budget_flag) {
  Run run = prepare(flags, true);
  if (run.cfg.profile.pool.empty()) {
    throw ConfigError("profile needs a nonempty profile.pool in the config");
  }
  std::uint64_t budget = budget_flag ? *budget_flag : run.cfg.profile.budget_flops;
  if (budget == 0) {
    throw ConfigError("profile needs a budget (profile.budget_flops or --budget)");
  }
  std::vector<std::pair<std::string, ArchSpec>> pool;
  for (const auto& [name, arch_cfg] : run.cfg.profile.pool) {
    RunConfig scratch = run.cfg;
    scratch.small_arch = arch_cfg;
    pool.emplace_back(name, build_small_arch(scratch, run.train));
  }
  for (const auto& [name, spec] : pool) {
    std::cout << "  " << name << ": "
              << count_flops(spec, run.cfg.profile.include_predictor)
              << " FLOPs\n";
  }
  std::string chosen =
      profile_select(pool, budget, run.cfg.profile.include_predictor);
  std::cout << "selected " << chosen << " under budget " << budget << "\n";

  nlohmann::json result{{"config_hash", run.hash},
                        {"seed", run.cfg.seed},
                        {"budget_flops", budget},
                        {"selected", chosen}};
  std::ofstream out(run.out / "profile_result.json");
  out << result.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "appealnet: joint approximator/predictor training and edge/cloud "
      "routing simulation"};
  app.require_subcommand(1);

  CommonFlags pretrain_flags, train_flags, eval_flags, sweep_flags,
      histogram_flags, profile_flags;

  auto* pretrain = app.add_subcommand("pretrain", "Train the approximator-only net");
  add_common(pretrain, pretrain_flags);
  std::string pretrain_target;
  pretrain->add_option("--target", pretrain_target,
                       "Which configured arch to pretrain: small or big")
      ->check(CLI::IsMember({"small", "big"}));

  auto* train = app.add_subcommand("train", "Joint two-head training");
  add_common(train, train_flags);
  std::string pretrained_path, train_big_ckpt;
  train->add_option("--pretrained", pretrained_path,
                    "Pretrained approximator checkpoint");
  train->add_option("--big-checkpoint", train_big_ckpt,
                    "Big-net checkpoint (white-box mode)");

  auto* eval = app.add_subcommand("eval", "Evaluate one routing threshold");
  add_common(eval, eval_flags);
  std::string eval_ckpt, eval_big_ckpt, eval_source;
  std::optional<double> eval_delta;
  eval->add_option("--checkpoint", eval_ckpt, "Two-head checkpoint");
  eval->add_option("--big-checkpoint", eval_big_ckpt, "Big-net checkpoint");
  eval->add_option("--delta", eval_delta, "Routing threshold");
  eval->add_option("--source", eval_source, "Score source: q, msp, sm, entropy");

  auto* sweep = app.add_subcommand("sweep", "Threshold sweep across all score sources");
  add_common(sweep, sweep_flags);
  std::string sweep_ckpt, sweep_big_ckpt;
  sweep->add_option("--checkpoint", sweep_ckpt, "Two-head checkpoint");
  sweep->add_option("--big-checkpoint", sweep_big_ckpt, "Big-net checkpoint");

  auto* histogram = app.add_subcommand("histogram", "Score histogram and AUROC");
  add_common(histogram, histogram_flags);
  std::string hist_ckpt, hist_source;
  std::optional<std::size_t> hist_bins;
  histogram->add_option("--checkpoint", hist_ckpt, "Two-head checkpoint");
  histogram->add_option("--source", hist_source, "Score source");
  histogram->add_option("--bins", hist_bins, "Histogram bin count");

  auto* profile = app.add_subcommand("profile", "Select the largest arch under a FLOPs budget");
  add_common(profile, profile_flags);
  std::optional<std::uint64_t> profile_budget;
  profile->add_option("--budget", profile_budget, "FLOPs budget");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*pretrain) return cmd_pretrain(pretrain_flags, pretrain_target);
    if (*train) return cmd_train(train_flags, pretrained_path, train_big_ckpt);
    if (*eval) return cmd_eval(eval_flags, eval_ckpt, eval_big_ckpt, eval_delta,
                               eval_source);
    if (*sweep) return cmd_sweep(sweep_flags, sweep_ckpt, sweep_big_ckpt);
    if (*histogram) return cmd_histogram(histogram_flags, hist_ckpt, hist_source,
                                         hist_bins);
    if (*profile) return cmd_profile(profile_flags, profile_budget);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
