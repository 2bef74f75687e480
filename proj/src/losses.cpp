#include "appealnet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace appealnet {

namespace {

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

}  // namespace

double LossBreakdown::mean_lp() const { return mean_of(l_p); }
double LossBreakdown::mean_lq() const { return mean_of(l_q); }

double cross_entropy(std::span<const double> p, std::size_t y) {
  if (y >= p.size()) {
    throw std::out_of_range("cross_entropy: label " + std::to_string(y) +
                            " out of range for " + std::to_string(p.size()) +
                            " classes");
  }
  return -std::log(std::clamp(p[y], kProbEps, 1.0));
}

double loss_p_whitebox(std::span<const double> p1, std::span<const double> p0,
                       std::size_t y, double q) {
  return q * cross_entropy(p1, y) + (1.0 - q) * cross_entropy(p0, y);
}

double loss_p_blackbox(std::span<const double> p1, std::size_t y, double q) {
  return q * cross_entropy(p1, y);
}

double loss_q(double q) { return -std::log(std::clamp(q, kProbEps, 1.0)); }

LossBreakdown total_loss(std::vector<double> l_p, std::vector<double> l_q,
                         double beta) {
  if (!(beta > 0.0)) {
    throw std::invalid_argument("total_loss: beta must be positive, got " +
                                std::to_string(beta));
  }
  if (l_p.size() != l_q.size() || l_p.empty()) {
    throw std::invalid_argument("total_loss: l_p and l_q must be nonempty and equally sized");
  }
  LossBreakdown out;
  out.l_p = std::move(l_p);
  out.l_q = std::move(l_q);
  out.beta = beta;
  out.total = out.mean_lp() + beta * out.mean_lq();
  return out;
}

LossBreakdown loss_regression(std::span<const double> pred,
                              std::span<const double> target, double q,
                              double beta) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument("loss_regression: pred has " +
                                std::to_string(pred.size()) +
                                " entries, target has " +
                                std::to_string(target.size()));
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - target[i];
    sq += d * d;
  }
  return total_loss({q * sq}, {loss_q(q)}, beta);
}

ConfidenceScores baseline_scores(std::span<const double> p) {
  if (p.size() < 2) {
    throw std::invalid_argument("baseline_scores: need K >= 2 probabilities");
  }
  double first = -1.0, second = -1.0;
  double entropy = 0.0;
  for (double v : p) {
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
    if (v > 0.0) entropy += v * std::log(v);  // 0 ln 0 := 0
  }
  ConfidenceScores s;
  s.msp = first;
  s.sm = first - second;
  s.entropy_score = entropy;
  return s;
}

double optimal_q(double ell, double beta) {
  if (!(ell > 0.0) || !(beta > 0.0)) {
    throw std::invalid_argument("optimal_q: ell and beta must be positive");
  }
  return std::min(beta / ell, 1.0);
}

double variance_estimate(double q, double beta) {
  if (!(q > 0.0) || q > 1.0) {
    throw std::invalid_argument("variance_estimate: q must be in (0, 1], got " +
                                std::to_string(q));
  }
  if (!(beta > 0.0)) {
    throw std::invalid_argument("variance_estimate: beta must be positive");
  }
  return beta / q;
}

JointLossGraph build_joint_loss(Graph& g, const TwoHeadOutput& out,
                                const std::vector<std::size_t>& labels,
                                std::span<const double> ce_big, double beta) {
  if (!(beta > 0.0)) {
    throw std::invalid_argument("build_joint_loss: beta must be positive");
  }
  std::size_t n = out.q->size();
  // ce for the approximator, kept differentiable through probs
  auto ce1 = g.affine(g.log_clamped(g.pick(out.probs, labels), kProbEps), -1.0, 0.0);
  auto lp = g.mul(out.q, ce1);
  if (!ce_big.empty()) {
    if (ce_big.size() != n) {
      throw std::invalid_argument("build_joint_loss: ce_big size mismatch");
    }
    auto ce0 = Tensor::from({n}, {ce_big.begin(), ce_big.end()});
    auto one_minus_q = g.affine(out.q, -1.0, 1.0);
    lp = g.add(lp, g.mul(one_minus_q, ce0));
  }
  auto lq = g.affine(g.log_clamped(out.q, kProbEps), -1.0, 0.0);
  JointLossGraph res;
  res.lp_vec = lp;
  res.lq_vec = lq;
  res.total = g.add(g.mean(lp), g.affine(g.mean(lq), beta, 0.0));
  return res;
}

JointLossGraph build_joint_loss_regression(Graph& g, const TwoHeadOutput& out,
                                           const TensorPtr& targets,
                                           double beta) {
  if (!(beta > 0.0)) {
    throw std::invalid_argument("build_joint_loss_regression: beta must be positive");
  }
  if (targets->shape != out.probs->shape) {
    throw std::invalid_argument(
        "build_joint_loss_regression: predictions " + out.probs->shape_str() +
        " vs targets " + targets->shape_str());
  }
  auto diff = g.add(out.probs, g.affine(targets, -1.0, 0.0));
  auto sq = g.row_sum(g.mul(diff, diff));
  auto lp = g.mul(out.q, sq);
  auto lq = g.affine(g.log_clamped(out.q, kProbEps), -1.0, 0.0);
  JointLossGraph res;
  res.lp_vec = lp;
  res.lq_vec = lq;
  res.total = g.add(g.mean(lp), g.affine(g.mean(lq), beta, 0.0));
  return res;
}

}  // namespace appealnet
