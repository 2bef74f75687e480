#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "appealnet/collab.hpp"
#include "appealnet/data.hpp"
#include "appealnet/trainer.hpp"

namespace appealnet {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parsed run configuration. The JSON schema is versioned and validated
/// fail-fast: unknown keys are errors. Every command dumps the resolved
/// config (with flag overrides applied) next to its outputs.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  struct DatasetCfg {
    std::string kind = "std_synth";
    SynthSpec synth;            // synthetic kinds
    std::string train_path;     // csv kind
    std::string test_path;
    CsvSchema csv;
  } dataset;

  struct ArchCfg {
    std::vector<std::size_t> extractor;
    std::vector<std::size_t> approx_head;
  } small_arch;

  struct BigCfg {
    bool oracle = true;
    ArchCfg arch;
    std::string checkpoint;
  } big;

  TrainConfig pretrain;  // lr 0.1 default (train from scratch)
  TrainConfig train;     // lr 0.01 default (fine-tune)

  struct CostCfg {
    std::optional<double> c1;
    std::optional<double> c0;
    std::optional<double> budget;
    double comm_surcharge = 0.0;
  } cost;

  struct SweepCfg {
    std::vector<double> deltas;  // explicit grid for the q source
  } sweep;

  struct HistogramCfg {
    std::size_t bins = 20;
    ScoreSource source = ScoreSource::PredictorQ;
  } histogram;

  struct EvalCfg {
    double delta = 0.5;
    ScoreSource source = ScoreSource::PredictorQ;
  } eval;

  double err_threshold = 0.5;

  struct ProfileCfg {
    std::vector<std::pair<std::string, ArchCfg>> pool;
    std::uint64_t budget_flops = 0;
    bool include_predictor = true;
  } profile;

  std::string pretrain_target = "small";  // small | big
  std::string pretrained_checkpoint;
  std::string checkpoint;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text);

std::string resolved_config_json(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

std::pair<Dataset, Dataset> build_dataset(const RunConfig& cfg);
ArchSpec build_small_arch(const RunConfig& cfg, const Dataset& train);
ArchSpec build_big_arch(const RunConfig& cfg, const Dataset& train);
BigMode train_mode(const RunConfig& cfg);

/// Cost constants: explicit values win; otherwise white-box costs derive
/// from counted FLOPs with the communication surcharge added to c0. An
/// oracle big model has no FLOPs to count, so oracle runs must state costs.
CostModel build_cost_model(const RunConfig& cfg, const ArchSpec& small,
                           const ArchSpec* big);

}  // namespace appealnet
