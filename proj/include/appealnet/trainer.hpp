#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "appealnet/data.hpp"
#include "appealnet/losses.hpp"
#include "appealnet/model.hpp"

namespace appealnet {

enum class BigMode { WhiteBox, BlackBox };

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double lr_init = 0.1;
  std::vector<std::size_t> lr_decay_epochs = {30, 60, 80};
  double lr_decay_factor = 0.2;
  double weight_decay = 5e-4;
  double beta_init = 0.1;
  double alpha = 0.5;  // expected predictor loss, set-point of the beta controller
  double beta_min = 1e-4;
  double beta_max = 1e4;
  std::uint64_t seed = 0;
  BigMode mode = BigMode::BlackBox;
  double err_threshold = 0.5;  // regression accuracy rule for logging

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_lp = 0.0;
  double mean_lq = 0.0;
  double beta = 0.0;
  double acc_train = 0.0;
  double acc_test = 0.0;
  double mean_q = 0.0;
};

struct StepRecord {
  double mean_lp = 0.0;
  double mean_lq = 0.0;
  double beta = 0.0;  // after the dynamic update
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::vector<StepRecord> steps;
};

/// lr_init * factor^(number of decay epochs <= epoch)
double lr_at(std::size_t epoch, const TrainConfig& cfg);

/// param <- param - lr * (grad + weight_decay * param)
void sgd_step(std::span<const TensorPtr> params, double lr,
              double weight_decay);

/// Alg.-2 multiplicative controller: mean_lq above alpha raises beta
/// (beta / 0.99), below lowers it (beta / 1.01); result clamped to bounds.
double update_beta(double beta, double mean_lq, double alpha, double beta_min,
                   double beta_max);

/// Plain cross-entropy (or squared-error) training of the approximator.
std::pair<ApproximatorNet, TrainLog> pretrain_approximator(
    const ArchSpec& arch, const Dataset& train, const Dataset& test,
    const TrainConfig& cfg);

/// Joint training of (f1, q) against the big model, with the dynamic beta
/// adjustment applied once per batch after the SGD step.
std::pair<TwoHeadNet, TrainLog> joint_train(TwoHeadNet net,
                                            const BigModel& big,
                                            const Dataset& train,
                                            const Dataset& test,
                                            const TrainConfig& cfg);

/// Fraction of samples whose prediction counts as correct: argmax match for
/// classification, RMSE below err_threshold for regression.
double approximator_accuracy(const ApproximatorNet& net, const Dataset& data,
                             double err_threshold = 0.0);
double approximator_accuracy(const TwoHeadNet& net, const Dataset& data,
                             double err_threshold = 0.0);

void write_train_log_csv(const TrainLog& log, const std::string& path);
void write_train_log_json(const TrainLog& log, const std::string& path,
                          const std::string& config_hash, std::uint64_t seed);

}  // namespace appealnet
