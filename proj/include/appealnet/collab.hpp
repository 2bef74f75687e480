#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "appealnet/data.hpp"
#include "appealnet/model.hpp"

namespace appealnet {

enum class ScoreSource { PredictorQ, Msp, ScoreMargin, Entropy };

std::string to_string(ScoreSource s);
ScoreSource score_source_from_string(const std::string& s);

/// Sample routes to the edge iff score >= delta (ties stay on the edge).
struct RoutingPolicy {
  ScoreSource source = ScoreSource::PredictorQ;
  double delta = 0.5;
};

enum class Route { Edge, Cloud };

inline Route route(double score, double delta) {
  return score >= delta ? Route::Edge : Route::Cloud;
}

/// Path costs: c1 for the edge (predictor + small net), c0 for the cloud
/// (predictor + big net + communication), and a budget b in (c1, c0).
struct CostModel {
  double c1 = 1.0;
  double c0 = 2.0;
  double b = 1.5;

  CostModel() = default;
  CostModel(double c1_, double c0_, double b_);
  static CostModel with_midpoint_budget(double c1_, double c0_);
};

/// (c0 - b) / (c0 - c1): the minimum fraction of inputs the edge must keep.
double budget_fraction(const CostModel& cost);

/// SR * c1 + (1 - SR) * c0
double overall_cost(double sr, const CostModel& cost);

/// (acc_sys - acc_small) / (acc_big - acc_small); empty when the
/// denominator is zero.
std::optional<double> acc_improvement(double acc_sys, double acc_small,
                                      double acc_big);

struct EvalReport {
  double delta = 0.0;
  double sr = 0.0;
  double ar = 0.0;  // always exactly 1 - sr
  double overall_accuracy = 0.0;
  double acc_small = 0.0;
  double acc_big = 0.0;
  std::optional<double> acc_i;
  double ad = 0.0;
  double cost = 0.0;
  std::size_t n_samples = 0;
};

EvalReport evaluate(const TwoHeadNet& net, const BigModel& big,
                    const Dataset& data, const RoutingPolicy& policy,
                    const CostModel& cost);

/// One report per delta; deltas must be sorted ascending.
std::vector<EvalReport> sweep_thresholds(const TwoHeadNet& net,
                                         const BigModel& big,
                                         const Dataset& data,
                                         ScoreSource source,
                                         const CostModel& cost,
                                         const std::vector<double>& deltas);

struct TargetUnattainable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AccuracyTarget {
  enum class Kind { MaxAD, MinAccI };
  Kind kind = Kind::MaxAD;
  double value = 0.0;
};

/// Scans a grid over the source's empirical score range (plus one all-cloud
/// point beyond the max) and returns the delta that maximizes SR subject to
/// the target; SR ties resolve to the largest delta.
double find_delta_for_target(const TwoHeadNet& net, const BigModel& big,
                             const Dataset& data, ScoreSource source,
                             const AccuracyTarget& target,
                             std::size_t grid_points = 1001);

double find_delta_for_target_regression(const TwoHeadNet& net,
                                        const Dataset& data,
                                        double err_threshold,
                                        const AccuracyTarget& target,
                                        std::size_t grid_points = 1001);

struct ScoreHistogram {
  std::vector<double> bin_left;  // bins equal-width over [0, 1]
  std::vector<std::size_t> correct;
  std::vector<std::size_t> incorrect;
};

/// Scores partitioned by whether the small net classifies the sample
/// correctly; out-of-range scores clamp into the edge bins.
ScoreHistogram score_histogram(const TwoHeadNet& net, const Dataset& data,
                               ScoreSource source, std::size_t bins);

/// P(random correct score > random incorrect score), ties counted 0.5,
/// computed from average ranks.
double auroc(const std::vector<double>& scores_correct,
             const std::vector<double>& scores_incorrect);

/// Regression analogue: a sample counts correct on the edge iff
/// RMSE(pred, target) < err_threshold; the big model is the oracle.
EvalReport evaluate_regression(const TwoHeadNet& net, const Dataset& data,
                               double err_threshold,
                               const RoutingPolicy& policy,
                               const CostModel& cost);

/// Per-sample routing scores for one source (q or a softmax baseline).
std::vector<double> routing_scores(const TwoHeadNet& net, const Dataset& data,
                                   ScoreSource source);

void write_reports_csv(const std::vector<EvalReport>& reports,
                       const std::vector<std::string>& sources,
                       const std::string& path, const std::string& config_hash,
                       std::uint64_t seed);
void write_reports_json(const std::vector<EvalReport>& reports,
                        const std::vector<std::string>& sources,
                        const std::string& path,
                        const std::string& config_hash, std::uint64_t seed);
void write_histogram_csv(const ScoreHistogram& hist, const std::string& path,
                         const std::string& config_hash, std::uint64_t seed);

}  // namespace appealnet
