#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "appealnet/model.hpp"

namespace appealnet {

/// Immutable sample block: N x d features plus integer labels
/// (classification) or N x m targets (regression).
struct Dataset {
  TaskKind task = TaskKind::Classification;
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> features;  // row-major n x d
  std::vector<int> labels;
  std::size_t num_classes = 0;
  std::vector<double> targets;  // row-major n x m
  std::size_t target_dim = 0;
  std::string split;

  std::span<const double> feature_row(std::size_t i) const {
    return {features.data() + i * d, d};
  }
  std::span<const double> target_row(std::size_t i) const {
    return {targets.data() + i * target_dim, target_dim};
  }
  void validate() const;
};

enum class SynthKind { GaussianBlobs, ConcentricRings, RegressionSurface };

/// Region-dependent noise rescaling for selected classes: the noise drawn
/// on `scaled_dim` is multiplied by lo + (hi - lo) * sigmoid(sharpness *
/// (x[gate_dim] - gate_offset)), evaluated at the sample's own gate
/// coordinate. Difficulty then varies across each class's support.
struct HeteroNoise {
  std::size_t scaled_dim = 1;
  std::size_t gate_dim = 2;
  double lo = 1.0;
  double hi = 1.0;
  double sharpness = 12.0;
  double gate_offset = 0.0;
  std::vector<int> classes;
};

/// Seed-deterministic synthetic data recipe. `overlap` is the class-center
/// separation divided by the component std (0 = coincident centers). For
/// GaussianBlobs, explicit per-class centers (K x d) may override the
/// automatic placement. For RegressionSurface, n is the total sample count
/// and k is the target dimension.
struct SynthSpec {
  SynthKind kind = SynthKind::GaussianBlobs;
  std::size_t n = 100;  // per class for classification, total for regression
  std::size_t d = 2;
  std::size_t k = 2;
  double overlap = 3.0;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
  // optional explicit centers, (K * blobs_per_class) x d row-major; a class
  // with several blobs is an even mixture of them
  std::vector<double> centers;
  std::size_t blobs_per_class = 1;
  std::optional<HeteroNoise> hetero;
};

std::pair<Dataset, Dataset> generate(const SynthSpec& spec);

/// The standard synthetic benchmark: K=4 blobs in d=8, n=500/class. Two
/// classes sit far out on axis 0; the other two overlap with centers one
/// base std apart on axis 1, and their axis-1 noise scale swings with the
/// (classification-neutral) axis-2 coordinate, so one side of the overlap
/// region is near-clean and the other much harder than the plain pair.
SynthSpec std_synth(std::uint64_t seed);

/// Regression benchmark: d=4 inputs, 2 smooth targets, heteroscedastic noise
/// that is near zero for x0 well below 0.3 and large above it.
SynthSpec reg_synth(std::uint64_t seed);
double reg_synth_err_threshold();

std::vector<double> one_hot(int label, std::size_t k);

/// CSV layout: header; feature columns f0..f{d-1}; label column y (int) for
/// classification or target columns t0..t{m-1} for regression.
struct CsvSchema {
  std::size_t d = 0;
  TaskKind task = TaskKind::Classification;
  std::size_t num_classes = 0;
  std::size_t target_dim = 0;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema);
void save_csv(const Dataset& data, const std::string& path);

}  // namespace appealnet
