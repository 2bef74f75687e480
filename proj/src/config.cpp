#include "appealnet/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "appealnet/format.hpp"

namespace appealnet {

namespace {

using nlohmann::json;

constexpr int kConfigVersion = 1;

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& ctx) {
  if (!j.is_object()) throw ConfigError("config: " + ctx + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("config: unknown key '" + key + "' in " + ctx);
    }
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for '" + key + "': " + e.what());
  }
}

template <typename T>
T get_req(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.contains(key)) {
    throw ConfigError("config: missing required key '" + key + "' in " + ctx);
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for '" + key + "': " + e.what());
  }
}

RunConfig::ArchCfg parse_arch(const json& j, const std::string& ctx) {
  check_keys(j, {"extractor", "approx_head"}, ctx);
  RunConfig::ArchCfg a;
  a.extractor = get_or<std::vector<std::size_t>>(j, "extractor", {});
  a.approx_head = get_req<std::vector<std::size_t>>(j, "approx_head", ctx);
  return a;
}

void parse_train_section(const json& j, const std::string& ctx,
                         TrainConfig& cfg) {
  check_keys(j,
             {"epochs", "batch_size", "lr_init", "lr_decay_epochs",
              "lr_decay_factor", "weight_decay", "beta_init", "alpha",
              "beta_bounds"},
             ctx);
  cfg.epochs = get_or<std::size_t>(j, "epochs", cfg.epochs);
  cfg.batch_size = get_or<std::size_t>(j, "batch_size", cfg.batch_size);
  cfg.lr_init = get_or<double>(j, "lr_init", cfg.lr_init);
  cfg.lr_decay_epochs = get_or<std::vector<std::size_t>>(j, "lr_decay_epochs",
                                                         cfg.lr_decay_epochs);
  cfg.lr_decay_factor = get_or<double>(j, "lr_decay_factor", cfg.lr_decay_factor);
  cfg.weight_decay = get_or<double>(j, "weight_decay", cfg.weight_decay);
  cfg.beta_init = get_or<double>(j, "beta_init", cfg.beta_init);
  cfg.alpha = get_or<double>(j, "alpha", cfg.alpha);
  if (j.contains("beta_bounds")) {
    auto b = get_req<std::vector<double>>(j, "beta_bounds", ctx);
    if (b.size() != 2) throw ConfigError("config: beta_bounds must be [min, max]");
    cfg.beta_min = b[0];
    cfg.beta_max = b[1];
  }
}

ScoreSource parse_source(const json& j, const std::string& key,
                         ScoreSource fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return score_source_from_string(j.at(key).get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

json arch_to_json(const RunConfig::ArchCfg& a) {
  return json{{"extractor", a.extractor}, {"approx_head", a.approx_head}};
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: JSON parse failure: ") + e.what());
  }
  check_keys(j,
             {"config_version", "seed", "out_dir", "dataset", "small_arch",
              "big", "pretrain", "train", "cost", "sweep", "histogram", "eval",
              "err_threshold", "profile", "pretrain_target",
              "pretrained_checkpoint", "checkpoint"},
             "top level");
  int version = get_req<int>(j, "config_version", "top level");
  if (version != kConfigVersion) {
    throw ConfigError("config: unsupported config_version " +
                      std::to_string(version) + " (expected " +
                      std::to_string(kConfigVersion) + ")");
  }

  RunConfig cfg;
  cfg.seed = get_or<std::uint64_t>(j, "seed", 0);
  cfg.out_dir = get_or<std::string>(j, "out_dir", "out");

  // dataset
  {
    const json& d = j.contains("dataset") ? j.at("dataset")
                                          : json{{"kind", "std_synth"}};
    check_keys(d,
               {"kind", "n", "d", "k", "overlap", "noise_std", "centers",
                "train_path", "test_path", "task", "num_classes", "target_dim"},
               "dataset");
    cfg.dataset.kind = get_or<std::string>(d, "kind", "std_synth");
    const std::string& kind = cfg.dataset.kind;
    if (kind == "std_synth") {
      cfg.dataset.synth = std_synth(cfg.seed);
    } else if (kind == "reg_synth") {
      cfg.dataset.synth = reg_synth(cfg.seed);
    } else if (kind == "gaussian_blobs" || kind == "concentric_rings" ||
               kind == "regression_surface") {
      SynthSpec s;
      s.kind = kind == "gaussian_blobs"     ? SynthKind::GaussianBlobs
               : kind == "concentric_rings" ? SynthKind::ConcentricRings
                                            : SynthKind::RegressionSurface;
      s.n = get_req<std::size_t>(d, "n", "dataset");
      s.d = get_req<std::size_t>(d, "d", "dataset");
      s.k = get_req<std::size_t>(d, "k", "dataset");
      s.overlap = get_or<double>(d, "overlap", 3.0);
      s.noise_std = get_or<double>(d, "noise_std", 1.0);
      s.centers = get_or<std::vector<double>>(d, "centers", {});
      s.seed = cfg.seed;
      cfg.dataset.synth = s;
    } else if (kind == "csv") {
      cfg.dataset.train_path = get_req<std::string>(d, "train_path", "dataset");
      cfg.dataset.test_path = get_req<std::string>(d, "test_path", "dataset");
      cfg.dataset.csv.d = get_req<std::size_t>(d, "d", "dataset");
      std::string task = get_or<std::string>(d, "task", "classification");
      if (task == "classification") {
        cfg.dataset.csv.task = TaskKind::Classification;
        cfg.dataset.csv.num_classes = get_req<std::size_t>(d, "num_classes", "dataset");
      } else if (task == "regression") {
        cfg.dataset.csv.task = TaskKind::Regression;
        cfg.dataset.csv.target_dim = get_req<std::size_t>(d, "target_dim", "dataset");
      } else {
        throw ConfigError("config: dataset task must be classification or regression");
      }
    } else {
      throw ConfigError("config: unknown dataset kind '" + kind + "'");
    }
  }

  if (j.contains("small_arch")) {
    cfg.small_arch = parse_arch(j.at("small_arch"), "small_arch");
  } else {
    cfg.small_arch.extractor = {16};
    cfg.small_arch.approx_head = {16, 0};  // output width filled from dataset
  }

  if (j.contains("big")) {
    const json& b = j.at("big");
    check_keys(b, {"kind", "arch", "checkpoint"}, "big");
    std::string kind = get_req<std::string>(b, "kind", "big");
    if (kind == "oracle") {
      cfg.big.oracle = true;
    } else if (kind == "whitebox") {
      cfg.big.oracle = false;
      if (!b.contains("arch")) {
        throw ConfigError("config: big.kind=whitebox requires big.arch");
      }
      cfg.big.arch = parse_arch(b.at("arch"), "big.arch");
      cfg.big.checkpoint = get_or<std::string>(b, "checkpoint", "");
    } else {
      throw ConfigError("config: big.kind must be oracle or whitebox");
    }
  }

  // pretraining defaults follow the from-scratch recipe, joint training the
  // fine-tune recipe
  cfg.pretrain.lr_init = 0.1;
  cfg.train.lr_init = 0.01;
  if (j.contains("pretrain")) parse_train_section(j.at("pretrain"), "pretrain", cfg.pretrain);
  if (j.contains("train")) parse_train_section(j.at("train"), "train", cfg.train);
  cfg.pretrain.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  cfg.train.mode = cfg.big.oracle ? BigMode::BlackBox : BigMode::WhiteBox;

  if (j.contains("cost")) {
    const json& c = j.at("cost");
    check_keys(c, {"c1", "c0", "budget", "comm_surcharge"}, "cost");
    if (c.contains("c1")) cfg.cost.c1 = c.at("c1").get<double>();
    if (c.contains("c0")) cfg.cost.c0 = c.at("c0").get<double>();
    if (c.contains("budget")) cfg.cost.budget = c.at("budget").get<double>();
    cfg.cost.comm_surcharge = get_or<double>(c, "comm_surcharge", 0.0);
  }

  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(s, {"deltas", "delta_min", "delta_max", "count"}, "sweep");
    if (s.contains("deltas")) {
      cfg.sweep.deltas = get_req<std::vector<double>>(s, "deltas", "sweep");
      if (cfg.sweep.deltas.empty()) {
        throw ConfigError("config: sweep.deltas must not be empty");
      }
      if (!std::is_sorted(cfg.sweep.deltas.begin(), cfg.sweep.deltas.end())) {
        throw ConfigError("config: sweep.deltas must be sorted ascending");
      }
    } else {
      double lo = get_or<double>(s, "delta_min", 0.0);
      double hi = get_or<double>(s, "delta_max", 1.1);
      auto count = get_or<std::size_t>(s, "count", 23);
      if (count < 2 || !(hi > lo)) {
        throw ConfigError("config: sweep needs count >= 2 and delta_max > delta_min");
      }
      for (std::size_t i = 0; i < count; ++i) {
        cfg.sweep.deltas.push_back(
            lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
      }
    }
  } else {
    for (std::size_t i = 0; i < 23; ++i) {
      cfg.sweep.deltas.push_back(1.1 * static_cast<double>(i) / 22.0);
    }
  }

  if (j.contains("histogram")) {
    const json& h = j.at("histogram");
    check_keys(h, {"bins", "source"}, "histogram");
    cfg.histogram.bins = get_or<std::size_t>(h, "bins", 20);
    cfg.histogram.source = parse_source(h, "source", ScoreSource::PredictorQ);
  }

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    check_keys(e, {"delta", "source"}, "eval");
    cfg.eval.delta = get_or<double>(e, "delta", 0.5);
    cfg.eval.source = parse_source(e, "source", ScoreSource::PredictorQ);
  }

  cfg.err_threshold = get_or<double>(j, "err_threshold", 0.5);
  cfg.pretrain.err_threshold = cfg.err_threshold;
  cfg.train.err_threshold = cfg.err_threshold;

  if (j.contains("profile")) {
    const json& p = j.at("profile");
    check_keys(p, {"pool", "budget_flops", "include_predictor"}, "profile");
    cfg.profile.budget_flops = get_or<std::uint64_t>(p, "budget_flops", 0);
    cfg.profile.include_predictor = get_or<bool>(p, "include_predictor", true);
    if (p.contains("pool")) {
      for (const auto& entry : p.at("pool")) {
        check_keys(entry, {"name", "arch"}, "profile.pool entry");
        cfg.profile.pool.emplace_back(
            get_req<std::string>(entry, "name", "profile.pool"),
            parse_arch(entry.at("arch"), "profile.pool arch"));
      }
    }
  }

  cfg.pretrain_target = get_or<std::string>(j, "pretrain_target", "small");
  if (cfg.pretrain_target != "small" && cfg.pretrain_target != "big") {
    throw ConfigError("config: pretrain_target must be small or big");
  }
  cfg.pretrained_checkpoint = get_or<std::string>(j, "pretrained_checkpoint", "");
  cfg.checkpoint = get_or<std::string>(j, "checkpoint", "");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

std::string resolved_config_json(const RunConfig& cfg) {
  json j;
  j["config_version"] = kConfigVersion;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;

  json d;
  d["kind"] = cfg.dataset.kind;
  if (cfg.dataset.kind == "csv") {
    d["train_path"] = cfg.dataset.train_path;
    d["test_path"] = cfg.dataset.test_path;
    d["d"] = cfg.dataset.csv.d;
    if (cfg.dataset.csv.task == TaskKind::Classification) {
      d["task"] = "classification";
      d["num_classes"] = cfg.dataset.csv.num_classes;
    } else {
      d["task"] = "regression";
      d["target_dim"] = cfg.dataset.csv.target_dim;
    }
  } else {
    const auto& s = cfg.dataset.synth;
    d["n"] = s.n;
    d["d"] = s.d;
    d["k"] = s.k;
    d["overlap"] = s.overlap;
    d["noise_std"] = s.noise_std;
    if (!s.centers.empty()) d["centers"] = s.centers;
  }
  j["dataset"] = d;

  j["small_arch"] = arch_to_json(cfg.small_arch);
  if (cfg.big.oracle) {
    j["big"] = json{{"kind", "oracle"}};
  } else {
    j["big"] = json{{"kind", "whitebox"},
                    {"arch", arch_to_json(cfg.big.arch)},
                    {"checkpoint", cfg.big.checkpoint}};
  }

  auto train_json = [](const TrainConfig& t) {
    return json{{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"lr_init", t.lr_init},
                {"lr_decay_epochs", t.lr_decay_epochs},
                {"lr_decay_factor", t.lr_decay_factor},
                {"weight_decay", t.weight_decay},
                {"beta_init", t.beta_init},
                {"alpha", t.alpha},
                {"beta_bounds", std::vector<double>{t.beta_min, t.beta_max}}};
  };
  j["pretrain"] = train_json(cfg.pretrain);
  j["train"] = train_json(cfg.train);

  json c;
  if (cfg.cost.c1) c["c1"] = *cfg.cost.c1;
  if (cfg.cost.c0) c["c0"] = *cfg.cost.c0;
  if (cfg.cost.budget) c["budget"] = *cfg.cost.budget;
  c["comm_surcharge"] = cfg.cost.comm_surcharge;
  j["cost"] = c;

  j["sweep"] = json{{"deltas", cfg.sweep.deltas}};
  j["histogram"] = json{{"bins", cfg.histogram.bins},
                        {"source", to_string(cfg.histogram.source)}};
  j["eval"] = json{{"delta", cfg.eval.delta},
                   {"source", to_string(cfg.eval.source)}};
  j["err_threshold"] = cfg.err_threshold;

  if (!cfg.profile.pool.empty() || cfg.profile.budget_flops) {
    json pool = json::array();
    for (const auto& [name, arch] : cfg.profile.pool) {
      pool.push_back(json{{"name", name}, {"arch", arch_to_json(arch)}});
    }
    j["profile"] = json{{"pool", pool},
                        {"budget_flops", cfg.profile.budget_flops},
                        {"include_predictor", cfg.profile.include_predictor}};
  }
  j["pretrain_target"] = cfg.pretrain_target;
  if (!cfg.pretrained_checkpoint.empty()) {
    j["pretrained_checkpoint"] = cfg.pretrained_checkpoint;
  }
  if (!cfg.checkpoint.empty()) j["checkpoint"] = cfg.checkpoint;
  return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& cfg) {
  return hex64(fnv1a64(resolved_config_json(cfg)));
}

std::pair<Dataset, Dataset> build_dataset(const RunConfig& cfg) {
  if (cfg.dataset.kind == "csv") {
    Dataset train = load_csv(cfg.dataset.train_path, cfg.dataset.csv);
    Dataset test = load_csv(cfg.dataset.test_path, cfg.dataset.csv);
    train.split = "train";
    test.split = "test";
    return {std::move(train), std::move(test)};
  }
  SynthSpec spec = cfg.dataset.synth;
  spec.seed = cfg.seed;  // seed overrides propagate into generation
  return generate(spec);
}

namespace {

ArchSpec arch_from_cfg(const RunConfig::ArchCfg& a, const Dataset& train,
                       const std::string& ctx) {
  ArchSpec spec;
  spec.input_dim = train.d;
  spec.task = train.task;
  spec.extractor_widths = a.extractor;
  spec.approx_widths = a.approx_head;
  std::size_t want = train.task == TaskKind::Classification ? train.num_classes
                                                            : train.target_dim;
  if (spec.approx_widths.empty()) {
    throw ConfigError("config: " + ctx + ".approx_head must not be empty");
  }
  if (spec.approx_widths.back() == 0) {
    spec.approx_widths.back() = want;  // default arch placeholder
  }
  if (spec.approx_widths.back() != want) {
    throw ConfigError("config: " + ctx + ".approx_head ends in " +
                      std::to_string(spec.approx_widths.back()) +
                      " but the dataset needs " + std::to_string(want) +
                      " outputs");
  }
  spec.validate();
  return spec;
}

}  // namespace

ArchSpec build_small_arch(const RunConfig& cfg, const Dataset& train) {
  return arch_from_cfg(cfg.small_arch, train, "small_arch");
}

ArchSpec build_big_arch(const RunConfig& cfg, const Dataset& train) {
  if (cfg.big.oracle) {
    throw ConfigError("config: big model is the oracle, no architecture to build");
  }
  return arch_from_cfg(cfg.big.arch, train, "big.arch");
}

BigMode train_mode(const RunConfig& cfg) {
  return cfg.big.oracle ? BigMode::BlackBox : BigMode::WhiteBox;
}

CostModel build_cost_model(const RunConfig& cfg, const ArchSpec& small,
                           const ArchSpec* big) {
  double c1, c0;
  if (cfg.cost.c1 && cfg.cost.c0) {
    c1 = *cfg.cost.c1;
    c0 = *cfg.cost.c0 + cfg.cost.comm_surcharge;
  } else if (big) {
    c1 = static_cast<double>(count_flops(small, true));
    c0 = static_cast<double>(count_flops(*big, false)) + cfg.cost.comm_surcharge;
  } else {
    throw ConfigError(
        "config: cost.c1 and cost.c0 are required when the big model is the "
        "oracle (no FLOPs to count)");
  }
  double b = cfg.cost.budget ? *cfg.cost.budget : 0.5 * (c1 + c0);
  return CostModel(c1, c0, b);
}

}  // namespace appealnet
