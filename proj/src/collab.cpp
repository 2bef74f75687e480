#include "appealnet/collab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "appealnet/format.hpp"
#include "appealnet/losses.hpp"

namespace appealnet {

namespace {

std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

struct SampleFlags {
  std::vector<double> score;
  std::vector<char> edge_correct;
  std::vector<char> cloud_correct;
};

// EvalReport from precomputed per-sample flags, so the classification and
// regression paths share the metric arithmetic
EvalReport report_from_flags(const SampleFlags& f, double delta,
                             const CostModel& cost) {
  std::size_t n = f.score.size();
  std::size_t n_edge = 0, sys_ok = 0, small_ok = 0, big_ok = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool edge = route(f.score[i], delta) == Route::Edge;
    if (edge) ++n_edge;
    if (edge ? f.edge_correct[i] : f.cloud_correct[i]) ++sys_ok;
    if (f.edge_correct[i]) ++small_ok;
    if (f.cloud_correct[i]) ++big_ok;
  }
  EvalReport r;
  r.delta = delta;
  r.n_samples = n;
  r.sr = static_cast<double>(n_edge) / static_cast<double>(n);
  r.ar = 1.0 - r.sr;
  r.overall_accuracy = static_cast<double>(sys_ok) / static_cast<double>(n);
  r.acc_small = static_cast<double>(small_ok) / static_cast<double>(n);
  r.acc_big = static_cast<double>(big_ok) / static_cast<double>(n);
  r.acc_i = acc_improvement(r.overall_accuracy, r.acc_small, r.acc_big);
  r.ad = r.acc_big - r.overall_accuracy;
  r.cost = overall_cost(r.sr, cost);
  return r;
}

SampleFlags classification_flags(const TwoHeadNet& net, const BigModel& big,
                                 const Dataset& data, ScoreSource source) {
  data.validate();
  if (data.task != TaskKind::Classification) {
    throw std::invalid_argument("evaluate: needs a classification dataset");
  }
  NetOutputs small = net.infer(data.features, data.n, data.d);
  NetOutputs cloud = big.infer(data.features, data.n, data.d, data.labels,
                               data.num_classes);
  SampleFlags f;
  f.score.resize(data.n);
  f.edge_correct.resize(data.n);
  f.cloud_correct.resize(data.n);
  for (std::size_t i = 0; i < data.n; ++i) {
    std::span<const double> p1{small.probs.data() + i * small.k, small.k};
    auto y = static_cast<std::size_t>(data.labels[i]);
    switch (source) {
      case ScoreSource::PredictorQ: f.score[i] = small.q[i]; break;
      case ScoreSource::Msp: f.score[i] = baseline_scores(p1).msp; break;
      case ScoreSource::ScoreMargin: f.score[i] = baseline_scores(p1).sm; break;
      case ScoreSource::Entropy:
        f.score[i] = baseline_scores(p1).entropy_score;
        break;
    }
    f.edge_correct[i] = argmax_row(p1) == y;
    if (big.is_oracle()) {
      f.cloud_correct[i] = 1;
    } else {
      std::span<const double> p0{cloud.probs.data() + i * cloud.k, cloud.k};
      f.cloud_correct[i] = argmax_row(p0) == y;
    }
  }
  return f;
}

SampleFlags regression_flags(const TwoHeadNet& net, const Dataset& data,
                             double err_threshold) {
  data.validate();
  if (data.task != TaskKind::Regression) {
    throw std::invalid_argument("evaluate_regression: needs a regression dataset");
  }
  if (!(err_threshold > 0.0)) {
    throw std::invalid_argument("evaluate_regression: err_threshold must be positive");
  }
  NetOutputs small = net.infer(data.features, data.n, data.d);
  SampleFlags f;
  f.score.resize(data.n);
  f.edge_correct.resize(data.n);
  f.cloud_correct.assign(data.n, 1);  // oracle path
  for (std::size_t i = 0; i < data.n; ++i) {
    f.score[i] = small.q[i];
    double sq = 0.0;
    for (std::size_t j = 0; j < small.k; ++j) {
      double d = small.probs[i * small.k + j] - data.targets[i * small.k + j];
      sq += d * d;
    }
    double rmse = std::sqrt(sq / static_cast<double>(small.k));
    f.edge_correct[i] = rmse < err_threshold;
  }
  return f;
}

double delta_for_target_on_flags(const SampleFlags& f,
                                 const AccuracyTarget& target,
                                 std::size_t grid_points) {
  if (grid_points < 2) {
    throw std::invalid_argument("find_delta_for_target: need >= 2 grid points");
  }
  auto [lo_it, hi_it] = std::minmax_element(f.score.begin(), f.score.end());
  double lo = *lo_it, hi = *hi_it;
  double span = hi - lo;
  double pad = span > 0.0 ? span / static_cast<double>(grid_points - 1)
                          : std::max(1e-9, std::abs(hi) * 1e-9 + 1e-9);
  CostModel unit(1.0, 2.0, 1.5);  // cost plays no role in target feasibility

  bool found = false;
  double best_sr = -1.0, best_delta = 0.0;
  for (std::size_t i = 0; i < grid_points; ++i) {
    double delta =
        i + 1 == grid_points
            ? hi + pad  // all-cloud fallback
            : lo + span * static_cast<double>(i) / static_cast<double>(grid_points - 1);
    EvalReport r = report_from_flags(f, delta, unit);
    bool ok = target.kind == AccuracyTarget::Kind::MaxAD
                  ? r.ad <= target.value
                  : (r.acc_i.has_value() && *r.acc_i >= target.value);
    if (!ok) continue;
    if (r.sr > best_sr || (r.sr == best_sr && delta > best_delta)) {
      best_sr = r.sr;
      best_delta = delta;
      found = true;
    }
  }
  if (!found) {
    throw TargetUnattainable(
        "find_delta_for_target: target not reachable at any threshold, "
        "including the all-cloud fallback");
  }
  return best_delta;
}

}  // namespace

std::string to_string(ScoreSource s) {
  switch (s) {
    case ScoreSource::PredictorQ: return "q";
    case ScoreSource::Msp: return "msp";
    case ScoreSource::ScoreMargin: return "sm";
    case ScoreSource::Entropy: return "entropy";
  }
  return "?";
}

ScoreSource score_source_from_string(const std::string& s) {
  if (s == "q") return ScoreSource::PredictorQ;
  if (s == "msp") return ScoreSource::Msp;
  if (s == "sm") return ScoreSource::ScoreMargin;
  if (s == "entropy") return ScoreSource::Entropy;
  throw std::invalid_argument("unknown score source '" + s +
                              "' (expected q, msp, sm or entropy)");
}

CostModel::CostModel(double c1_, double c0_, double b_)
    : c1(c1_), c0(c0_), b(b_) {
  if (!(c1 > 0.0) || !(c0 > c1)) {
    throw std::invalid_argument("CostModel: need c0 > c1 > 0, got c1=" +
                                format_double(c1) + " c0=" + format_double(c0));
  }
}

CostModel CostModel::with_midpoint_budget(double c1_, double c0_) {
  return CostModel(c1_, c0_, 0.5 * (c1_ + c0_));
}

double budget_fraction(const CostModel& cost) {
  if (!(cost.b > cost.c1 && cost.b < cost.c0)) {
    throw std::invalid_argument("budget_fraction: budget " +
                                format_double(cost.b) + " outside (" +
                                format_double(cost.c1) + ", " +
                                format_double(cost.c0) + ")");
  }
  return (cost.c0 - cost.b) / (cost.c0 - cost.c1);
}

double overall_cost(double sr, const CostModel& cost) {
  return sr * cost.c1 + (1.0 - sr) * cost.c0;
}

std::optional<double> acc_improvement(double acc_sys, double acc_small,
                                      double acc_big) {
  double denom = acc_big - acc_small;
  if (denom == 0.0) return std::nullopt;
  return (acc_sys - acc_small) / denom;
}

EvalReport evaluate(const TwoHeadNet& net, const BigModel& big,
                    const Dataset& data, const RoutingPolicy& policy,
                    const CostModel& cost) {
  return report_from_flags(classification_flags(net, big, data, policy.source),
                           policy.delta, cost);
}

std::vector<EvalReport> sweep_thresholds(const TwoHeadNet& net,
                                         const BigModel& big,
                                         const Dataset& data,
                                         ScoreSource source,
                                         const CostModel& cost,
                                         const std::vector<double>& deltas) {
  if (!std::is_sorted(deltas.begin(), deltas.end())) {
    throw std::invalid_argument("sweep_thresholds: deltas must be sorted ascending");
  }
  SampleFlags flags = classification_flags(net, big, data, source);
  std::vector<EvalReport> reports;
  reports.reserve(deltas.size());
  for (double d : deltas) reports.push_back(report_from_flags(flags, d, cost));
  return reports;
}

double find_delta_for_target(const TwoHeadNet& net, const BigModel& big,
                             const Dataset& data, ScoreSource source,
                             const AccuracyTarget& target,
                             std::size_t grid_points) {
  return delta_for_target_on_flags(classification_flags(net, big, data, source),
                                   target, grid_points);
}

double find_delta_for_target_regression(const TwoHeadNet& net,
                                        const Dataset& data,
                                        double err_threshold,
                                        const AccuracyTarget& target,
                                        std::size_t grid_points) {
  return delta_for_target_on_flags(regression_flags(net, data, err_threshold),
                                   target, grid_points);
}

ScoreHistogram score_histogram(const TwoHeadNet& net, const Dataset& data,
                               ScoreSource source, std::size_t bins) {
  if (bins < 2) {
    throw std::invalid_argument("score_histogram: need at least 2 bins");
  }
  SampleFlags f = classification_flags(net, BigModel::oracle(), data, source);
  ScoreHistogram h;
  h.bin_left.resize(bins);
  h.correct.assign(bins, 0);
  h.incorrect.assign(bins, 0);
  for (std::size_t b = 0; b < bins; ++b) {
    h.bin_left[b] = static_cast<double>(b) / static_cast<double>(bins);
  }
  for (std::size_t i = 0; i < f.score.size(); ++i) {
    double s = std::clamp(f.score[i], 0.0, 1.0);
    auto b = std::min(bins - 1,
                      static_cast<std::size_t>(s * static_cast<double>(bins)));
    if (f.edge_correct[i]) {
      ++h.correct[b];
    } else {
      ++h.incorrect[b];
    }
  }
  return h;
}

double auroc(const std::vector<double>& scores_correct,
             const std::vector<double>& scores_incorrect) {
  if (scores_correct.empty() || scores_incorrect.empty()) {
    throw std::invalid_argument("auroc: both score lists must be nonempty");
  }
  struct Entry {
    double score;
    bool correct;
  };
  std::vector<Entry> all;
  all.reserve(scores_correct.size() + scores_incorrect.size());
  for (double s : scores_correct) all.push_back({s, true});
  for (double s : scores_incorrect) all.push_back({s, false});
  std::stable_sort(all.begin(), all.end(),
                   [](const Entry& a, const Entry& b) { return a.score < b.score; });

  double rank_sum_correct = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].score == all[i].score) ++j;
    double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based ranks
    for (std::size_t t = i; t < j; ++t) {
      if (all[t].correct) rank_sum_correct += avg_rank;
    }
    i = j;
  }
  double nc = static_cast<double>(scores_correct.size());
  double ni = static_cast<double>(scores_incorrect.size());
  return (rank_sum_correct - nc * (nc + 1.0) / 2.0) / (nc * ni);
}

EvalReport evaluate_regression(const TwoHeadNet& net, const Dataset& data,
                               double err_threshold,
                               const RoutingPolicy& policy,
                               const CostModel& cost) {
  if (policy.source != ScoreSource::PredictorQ) {
    throw std::invalid_argument(
        "evaluate_regression: softmax baselines are undefined for regression; "
        "use the q source");
  }
  return report_from_flags(regression_flags(net, data, err_threshold),
                           policy.delta, cost);
}

std::vector<double> routing_scores(const TwoHeadNet& net, const Dataset& data,
                                   ScoreSource source) {
  if (data.task == TaskKind::Regression) {
    if (source != ScoreSource::PredictorQ) {
      throw std::invalid_argument("routing_scores: regression supports the q source only");
    }
    NetOutputs small = net.infer(data.features, data.n, data.d);
    return small.q;
  }
  return classification_flags(net, BigModel::oracle(), data, source).score;
}

namespace {

nlohmann::json report_to_json(const EvalReport& r, const std::string& source) {
  nlohmann::json j{{"source", source},
                   {"delta", r.delta},
                   {"sr", r.sr},
                   {"ar", r.ar},
                   {"overall_accuracy", r.overall_accuracy},
                   {"acc_small", r.acc_small},
                   {"acc_big", r.acc_big},
                   {"ad", r.ad},
                   {"cost", r.cost},
                   {"n_samples", r.n_samples}};
  j["acc_i"] = r.acc_i ? nlohmann::json(*r.acc_i) : nlohmann::json();
  return j;
}

}  // namespace

void write_reports_csv(const std::vector<EvalReport>& reports,
                       const std::vector<std::string>& sources,
                       const std::string& path, const std::string& config_hash,
                       std::uint64_t seed) {
  if (sources.size() != reports.size()) {
    throw std::invalid_argument("write_reports_csv: one source tag per report");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("reports: cannot write " + path);
  out << "# config_hash=" << config_hash << " seed=" << seed << "\n";
  out << "source,delta,sr,ar,overall_accuracy,acc_small,acc_big,acc_i,ad,cost,"
         "n_samples\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out << sources[i] << "," << format_double(r.delta) << ","
        << format_double(r.sr) << "," << format_double(r.ar) << ","
        << format_double(r.overall_accuracy) << ","
        << format_double(r.acc_small) << "," << format_double(r.acc_big) << ","
        << (r.acc_i ? format_double(*r.acc_i) : std::string()) << ","
        << format_double(r.ad) << "," << format_double(r.cost) << ","
        << r.n_samples << "\n";
  }
}

void write_reports_json(const std::vector<EvalReport>& reports,
                        const std::vector<std::string>& sources,
                        const std::string& path,
                        const std::string& config_hash, std::uint64_t seed) {
  if (sources.size() != reports.size()) {
    throw std::invalid_argument("write_reports_json: one source tag per report");
  }
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["reports"] = nlohmann::json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    j["reports"].push_back(report_to_json(reports[i], sources[i]));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("reports: cannot write " + path);
  out << j.dump(2) << "\n";
}

void write_histogram_csv(const ScoreHistogram& hist, const std::string& path,
                         const std::string& config_hash, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("histogram: cannot write " + path);
  out << "# config_hash=" << config_hash << " seed=" << seed << "\n";
  out << "bin_left,correct_count,incorrect_count\n";
  for (std::size_t b = 0; b < hist.bin_left.size(); ++b) {
    out << format_double(hist.bin_left[b]) << "," << hist.correct[b] << ","
        << hist.incorrect[b] << "\n";
  }
}

}  // namespace appealnet
