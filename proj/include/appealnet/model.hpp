#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "appealnet/tensor.hpp"

namespace appealnet {

enum class TaskKind { Classification, Regression };

/// Layer widths of a small dense network: shared feature extractor, an
/// approximator head whose last width is the output dimension (K classes
/// or m regression targets), and an implicit single-layer predictor head
/// (extractor output -> 1).
struct ArchSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> extractor_widths;
  std::vector<std::size_t> approx_widths;  // last entry = output_dim
  TaskKind task = TaskKind::Classification;

  std::size_t output_dim() const;
  std::size_t num_classes() const;  // classification alias for output_dim
  std::size_t feature_dim() const;  // extractor output width
  void validate() const;
  bool operator==(const ArchSpec&) const = default;
  std::string describe() const;
};

struct DenseLayer {
  TensorPtr weight;  // [in x out]
  TensorPtr bias;    // [out]
};

struct NetOutputs {
  std::size_t n = 0;
  std::size_t k = 0;               // output dim per sample
  std::vector<double> probs;       // n x k; raw outputs for regression
  std::vector<double> q;           // n; empty for approximator-only nets
};

/// Feature extractor + approximator head. Classification nets end in a
/// softmax; regression nets emit the last dense layer directly.
class ApproximatorNet {
 public:
  ApproximatorNet() = default;
  static ApproximatorNet init(const ArchSpec& spec, std::uint64_t seed);

  const ArchSpec& spec() const { return spec_; }
  TensorPtr features(Graph& g, const TensorPtr& batch) const;
  TensorPtr outputs(Graph& g, const TensorPtr& batch) const;  // probs or preds
  std::vector<TensorPtr> parameters() const;
  ApproximatorNet clone() const;

  // convenience non-training forward over a raw row-major feature block
  NetOutputs infer(const std::vector<double>& features, std::size_t n,
                   std::size_t d) const;

  std::vector<DenseLayer>& extractor() { return extractor_; }
  std::vector<DenseLayer>& approx_head() { return approx_head_; }
  const std::vector<DenseLayer>& extractor() const { return extractor_; }
  const std::vector<DenseLayer>& approx_head() const { return approx_head_; }

 private:
  ArchSpec spec_;
  std::vector<DenseLayer> extractor_;
  std::vector<DenseLayer> approx_head_;
  friend class TwoHeadNet;
};

struct TwoHeadOutput {
  TensorPtr probs;  // [n x K] (or raw predictions for regression)
  TensorPtr q;      // [n], each entry in (0,1)
};

/// Approximator plus the single-dense-layer predictor head, both consuming
/// one shared extractor pass.
class TwoHeadNet {
 public:
  TwoHeadNet() = default;

  const ArchSpec& spec() const { return approx_.spec(); }
  const ApproximatorNet& approximator() const { return approx_; }
  ApproximatorNet& approximator() { return approx_; }
  DenseLayer& predictor_head() { return predictor_; }
  const DenseLayer& predictor_head() const { return predictor_; }

  TwoHeadOutput forward(Graph& g, const TensorPtr& batch) const;
  NetOutputs infer(const std::vector<double>& features, std::size_t n,
                   std::size_t d) const;

  std::vector<TensorPtr> parameters() const;            // all three groups
  std::vector<TensorPtr> approximator_parameters() const;
  std::vector<TensorPtr> predictor_parameters() const;
  TwoHeadNet clone() const;

 private:
  ApproximatorNet approx_;
  DenseLayer predictor_;
  friend TwoHeadNet insert_predictor_head(const ApproximatorNet&,
                                          std::uint64_t);
  friend TwoHeadNet load_two_head(const std::string&);
};

/// Copies the pretrained parameters unchanged and attaches a freshly
/// initialized predictor head (bias 0, so q starts at 0.5 under zero weights).
TwoHeadNet insert_predictor_head(const ApproximatorNet& pretrained,
                                 std::uint64_t seed);

/// Big network: a trained white-box net, or the black-box oracle that
/// returns the ground-truth one-hot label for every queried sample.
class BigModel {
 public:
  static BigModel white_box(ApproximatorNet net);
  static BigModel oracle();

  bool is_oracle() const { return oracle_; }
  const ApproximatorNet& net() const;

  // per-sample class probabilities; labels are consumed only by the oracle
  NetOutputs infer(const std::vector<double>& features, std::size_t n,
                   std::size_t d, const std::vector<int>& labels,
                   std::size_t num_classes) const;

 private:
  bool oracle_ = false;
  std::optional<ApproximatorNet> net_;
};

/// 2*in*out multiply-adds plus the bias add, summed over dense layers.
std::uint64_t count_flops(const ArchSpec& spec, bool include_predictor = true);

struct NoArchitectureFits : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Largest-FLOPs pool member within budget; ties broken by pool order.
std::string profile_select(
    const std::vector<std::pair<std::string, ArchSpec>>& pool,
    std::uint64_t budget_flops, bool include_predictor = true);

// Versioned checkpoint files; save->load is value-exact.
void save_checkpoint(const ApproximatorNet& net, const std::string& path);
void save_checkpoint(const TwoHeadNet& net, const std::string& path);
ApproximatorNet load_approximator(const std::string& path);
TwoHeadNet load_two_head(const std::string& path);

}  // namespace appealnet
