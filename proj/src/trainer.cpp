#include "appealnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "appealnet/format.hpp"
#include "appealnet/rng.hpp"

namespace appealnet {

namespace {

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                     std::size_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0xe90c + epoch));
  rng.shuffle(order);
  return order;
}

struct Batch {
  TensorPtr x;                     // [m x d]
  std::vector<std::size_t> labels; // classification
  TensorPtr targets;               // regression, [m x t]
  std::vector<std::size_t> rows;   // source rows in the dataset
};

Batch make_batch(const Dataset& data, std::span<const std::size_t> rows) {
  Batch b;
  b.rows.assign(rows.begin(), rows.end());
  std::vector<double> x;
  x.reserve(rows.size() * data.d);
  for (std::size_t r : rows) {
    auto row = data.feature_row(r);
    x.insert(x.end(), row.begin(), row.end());
  }
  b.x = Tensor::from({rows.size(), data.d}, std::move(x));
  if (data.task == TaskKind::Classification) {
    b.labels.reserve(rows.size());
    for (std::size_t r : rows) {
      b.labels.push_back(static_cast<std::size_t>(data.labels[r]));
    }
  } else {
    std::vector<double> t;
    t.reserve(rows.size() * data.target_dim);
    for (std::size_t r : rows) {
      auto row = data.target_row(r);
      t.insert(t.end(), row.begin(), row.end());
    }
    b.targets = Tensor::from({rows.size(), data.target_dim}, std::move(t));
  }
  return b;
}

std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

double accuracy_from_outputs(const NetOutputs& out, const Dataset& data,
                             double err_threshold) {
  std::size_t correct = 0;
  if (data.task == TaskKind::Classification) {
    for (std::size_t i = 0; i < data.n; ++i) {
      std::span<const double> row{out.probs.data() + i * out.k, out.k};
      if (argmax_row(row) == static_cast<std::size_t>(data.labels[i])) ++correct;
    }
  } else {
    if (!(err_threshold > 0.0)) {
      throw std::invalid_argument("accuracy: regression needs err_threshold > 0");
    }
    for (std::size_t i = 0; i < data.n; ++i) {
      double sq = 0.0;
      for (std::size_t j = 0; j < out.k; ++j) {
        double d = out.probs[i * out.k + j] - data.targets[i * out.k + j];
        sq += d * d;
      }
      double rmse = std::sqrt(sq / static_cast<double>(out.k));
      if (rmse < err_threshold) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.n);
}

// per-sample cross-entropy of the frozen big network on one batch
std::vector<double> big_ce(const BigModel& big, const Dataset& data,
                           const Batch& batch) {
  std::vector<double> feats(batch.x->values);
  std::vector<int> labels;
  labels.reserve(batch.rows.size());
  for (std::size_t r : batch.rows) labels.push_back(data.labels[r]);
  NetOutputs out = big.infer(feats, batch.rows.size(), data.d, labels,
                             data.num_classes);
  std::vector<double> ce(batch.rows.size());
  for (std::size_t i = 0; i < ce.size(); ++i) {
    std::span<const double> row{out.probs.data() + i * out.k, out.k};
    ce[i] = cross_entropy(row, static_cast<std::size_t>(labels[i]));
  }
  return ce;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size >= 1 required");
  if (!(lr_init > 0.0)) throw std::invalid_argument("TrainConfig: lr_init must be positive");
  if (!(lr_decay_factor > 0.0)) throw std::invalid_argument("TrainConfig: lr_decay_factor must be positive");
  if (!(beta_init > 0.0)) throw std::invalid_argument("TrainConfig: beta_init must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("TrainConfig: alpha must be in (0, 1)");
  if (!(beta_min <= beta_init && beta_init <= beta_max)) {
    throw std::invalid_argument("TrainConfig: need beta_min <= beta_init <= beta_max");
  }
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  std::size_t decays = 0;
  for (std::size_t e : cfg.lr_decay_epochs) {
    if (e <= epoch) ++decays;
  }
  return cfg.lr_init * std::pow(cfg.lr_decay_factor, static_cast<double>(decays));
}

void sgd_step(std::span<const TensorPtr> params, double lr,
              double weight_decay) {
  if (!(lr > 0.0)) throw std::invalid_argument("sgd_step: lr must be positive");
  for (const auto& p : params) {
    for (std::size_t i = 0; i < p->size(); ++i) {
      p->values[i] -= lr * (p->grad[i] + weight_decay * p->values[i]);
    }
  }
}

double update_beta(double beta, double mean_lq, double alpha, double beta_min,
                   double beta_max) {
  double next = mean_lq > alpha ? beta / 0.99 : beta / 1.01;
  return std::clamp(next, beta_min, beta_max);
}

std::pair<ApproximatorNet, TrainLog> pretrain_approximator(
    const ArchSpec& arch, const Dataset& train, const Dataset& test,
    const TrainConfig& cfg) {
  cfg.validate();
  train.validate();
  if (train.task != arch.task) {
    throw std::invalid_argument("pretrain: dataset task does not match arch task");
  }

  ApproximatorNet net = ApproximatorNet::init(arch, cfg.seed);
  auto params = net.parameters();
  TrainLog log;
  double err_thr = arch.task == TaskKind::Regression ? cfg.err_threshold : 0.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = lr_at(epoch, cfg);
    auto order = epoch_order(train.n, cfg.seed, epoch);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < train.n; start += cfg.batch_size) {
      std::size_t m = std::min(cfg.batch_size, train.n - start);
      Batch batch = make_batch(train, {order.data() + start, m});
      Graph g;
      auto out = net.outputs(g, batch.x);
      TensorPtr loss;
      if (train.task == TaskKind::Classification) {
        loss = g.mean(g.affine(
            g.log_clamped(g.pick(out, batch.labels), kProbEps), -1.0, 0.0));
      } else {
        auto diff = g.add(out, g.affine(batch.targets, -1.0, 0.0));
        loss = g.mean(g.row_sum(g.mul(diff, diff)));
      }
      zero_grads(params);
      g.backward(loss);
      sgd_step(params, lr, cfg.weight_decay);
      loss_sum += loss->values[0];
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_lp = loss_sum / static_cast<double>(batches);
    rec.mean_lq = std::nan("");
    rec.beta = std::nan("");
    rec.mean_q = std::nan("");
    rec.acc_train = approximator_accuracy(net, train, err_thr);
    rec.acc_test = test.n > 0 ? approximator_accuracy(net, test, err_thr)
                              : std::nan("");
    log.epochs.push_back(rec);
  }
  return {std::move(net), std::move(log)};
}

std::pair<TwoHeadNet, TrainLog> joint_train(TwoHeadNet net, const BigModel& big,
                                            const Dataset& train,
                                            const Dataset& test,
                                            const TrainConfig& cfg) {
  cfg.validate();
  train.validate();
  if (cfg.mode == BigMode::WhiteBox && big.is_oracle()) {
    throw std::invalid_argument("joint_train: white-box mode needs a white-box big model");
  }
  if (cfg.mode == BigMode::BlackBox && !big.is_oracle()) {
    throw std::invalid_argument("joint_train: black-box mode needs the oracle big model");
  }
  if (train.task == TaskKind::Regression && cfg.mode != BigMode::BlackBox) {
    throw std::invalid_argument("joint_train: regression supports black-box mode only");
  }

  auto params = net.parameters();
  double beta = cfg.beta_init;
  TrainLog log;
  double err_thr = train.task == TaskKind::Regression ? cfg.err_threshold : 0.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = lr_at(epoch, cfg);
    auto order = epoch_order(train.n, derive_seed(cfg.seed, 0x901e), epoch);
    double lp_sum = 0.0, lq_sum = 0.0, q_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < train.n; start += cfg.batch_size) {
      std::size_t m = std::min(cfg.batch_size, train.n - start);
      Batch batch = make_batch(train, {order.data() + start, m});
      Graph g;
      auto out = net.forward(g, batch.x);
      JointLossGraph joint;
      if (train.task == TaskKind::Classification) {
        std::vector<double> ce0;
        if (cfg.mode == BigMode::WhiteBox) ce0 = big_ce(big, train, batch);
        joint = build_joint_loss(g, out, batch.labels, ce0, beta);
      } else {
        joint = build_joint_loss_regression(g, out, batch.targets, beta);
      }
      zero_grads(params);
      g.backward(joint.total);
      sgd_step(params, lr, cfg.weight_decay);

      double mean_lp = 0.0, mean_lq = 0.0, mean_q = 0.0;
      for (double v : joint.lp_vec->values) mean_lp += v;
      for (double v : joint.lq_vec->values) mean_lq += v;
      for (double v : out.q->values) mean_q += v;
      mean_lp /= static_cast<double>(m);
      mean_lq /= static_cast<double>(m);
      mean_q /= static_cast<double>(m);

      beta = update_beta(beta, mean_lq, cfg.alpha, cfg.beta_min, cfg.beta_max);
      log.steps.push_back(StepRecord{mean_lp, mean_lq, beta});
      lp_sum += mean_lp;
      lq_sum += mean_lq;
      q_sum += mean_q;
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_lp = lp_sum / static_cast<double>(batches);
    rec.mean_lq = lq_sum / static_cast<double>(batches);
    rec.beta = beta;
    rec.mean_q = q_sum / static_cast<double>(batches);
    rec.acc_train = approximator_accuracy(net, train, err_thr);
    rec.acc_test = test.n > 0 ? approximator_accuracy(net, test, err_thr)
                              : std::nan("");
    log.epochs.push_back(rec);
  }
  return {std::move(net), std::move(log)};
}

double approximator_accuracy(const ApproximatorNet& net, const Dataset& data,
                             double err_threshold) {
  return accuracy_from_outputs(net.infer(data.features, data.n, data.d), data,
                               err_threshold);
}

double approximator_accuracy(const TwoHeadNet& net, const Dataset& data,
                             double err_threshold) {
  return accuracy_from_outputs(net.infer(data.features, data.n, data.d), data,
                               err_threshold);
}

void write_train_log_csv(const TrainLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("train log: cannot write " + path);
  out << "epoch,mean_lp,mean_lq,beta,acc_train,acc_test,mean_q\n";
  for (const auto& r : log.epochs) {
    out << r.epoch << "," << format_double(r.mean_lp) << ","
        << format_double(r.mean_lq) << "," << format_double(r.beta) << ","
        << format_double(r.acc_train) << "," << format_double(r.acc_test)
        << "," << format_double(r.mean_q) << "\n";
  }
}

void write_train_log_json(const TrainLog& log, const std::string& path,
                          const std::string& config_hash, std::uint64_t seed) {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  auto num_or_null = [](double v) {
    return std::isnan(v) ? nlohmann::json() : nlohmann::json(v);
  };
  j["epochs"] = nlohmann::json::array();
  for (const auto& r : log.epochs) {
    j["epochs"].push_back({{"epoch", r.epoch},
                           {"mean_lp", r.mean_lp},
                           {"mean_lq", num_or_null(r.mean_lq)},
                           {"beta", num_or_null(r.beta)},
                           {"acc_train", r.acc_train},
                           {"acc_test", num_or_null(r.acc_test)},
                           {"mean_q", num_or_null(r.mean_q)}});
  }
  j["steps"] = nlohmann::json::array();
  for (const auto& s : log.steps) {
    j["steps"].push_back({{"mean_lp", s.mean_lp},
                          {"mean_lq", s.mean_lq},
                          {"beta", s.beta}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("train log: cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace appealnet
