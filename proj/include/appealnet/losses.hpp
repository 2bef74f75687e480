#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "appealnet/model.hpp"
#include "appealnet/tensor.hpp"

namespace appealnet {

/// Probability clamp applied inside every log.
inline constexpr double kProbEps = 1e-7;

/// Per-example loss terms and the weighted batch total
/// total = mean(l_p) + beta * mean(l_q).
struct LossBreakdown {
  std::vector<double> l_p;
  std::vector<double> l_q;
  double total = 0.0;
  double beta = 0.0;
  double mean_lp() const;
  double mean_lq() const;
};

struct ConfidenceScores {
  double msp = 0.0;            // max softmax probability
  double sm = 0.0;             // margin between top-1 and top-2
  double entropy_score = 0.0;  // sum p ln p  (<= 0, higher = more confident)
};

// cross-entropy of one probability row, -ln p[y] with p clamped to [eps, 1]
double cross_entropy(std::span<const double> p, std::size_t y);

// q * l(p1, y) + (1 - q) * l(p0, y)
double loss_p_whitebox(std::span<const double> p1, std::span<const double> p0,
                       std::size_t y, double q);

// oracle big model: the f0 term vanishes, leaving q * l(p1, y)
double loss_p_blackbox(std::span<const double> p1, std::size_t y, double q);

// -ln q with q clamped to [eps, 1]
double loss_q(double q);

/// Batch reduction of precomputed per-example terms.
LossBreakdown total_loss(std::vector<double> l_p, std::vector<double> l_q,
                         double beta);

/// Black-box regression loss: l_p = q * ||pred - target||^2, l_q = -ln q.
LossBreakdown loss_regression(std::span<const double> pred,
                              std::span<const double> target, double q,
                              double beta);

ConfidenceScores baseline_scores(std::span<const double> p);

/// Minimizer of z*ell - beta*ln z over (0, 1]: min(beta/ell, 1).
double optimal_q(double ell, double beta);

/// Gaussian-variance diagnostic sigma^2 = beta / q.
double variance_estimate(double q, double beta);

/// Differentiable joint objective built on a graph from a two-head forward
/// pass: total = mean(l_p) + beta * mean(l_q). In white-box mode ce_big holds
/// the frozen big network's per-example cross-entropy; in black-box mode pass
/// an empty span (the oracle term is identically zero).
struct JointLossGraph {
  TensorPtr total;   // scalar
  TensorPtr lp_vec;  // [n]
  TensorPtr lq_vec;  // [n]
};
JointLossGraph build_joint_loss(Graph& g, const TwoHeadOutput& out,
                                const std::vector<std::size_t>& labels,
                                std::span<const double> ce_big, double beta);

/// Regression form of the joint objective (black-box): targets is the n x m
/// row-major target block matching out.probs.
JointLossGraph build_joint_loss_regression(Graph& g, const TwoHeadOutput& out,
                                           const TensorPtr& targets,
                                           double beta);

}  // namespace appealnet
