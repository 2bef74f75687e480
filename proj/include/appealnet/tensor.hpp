#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace appealnet {

/// Dense double-precision array with a gradient buffer of the same shape.
/// Gradients accumulate across backward passes until zero_grad() is called.
class Tensor {
 public:
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;
  std::string name;

  static std::shared_ptr<Tensor> zeros(std::vector<std::size_t> shape,
                                       std::string name = "");
  static std::shared_ptr<Tensor> from(std::vector<std::size_t> shape,
                                      std::vector<double> values,
                                      std::string name = "");
  static std::shared_ptr<Tensor> scalar(double v, std::string name = "");

  std::size_t size() const { return values.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;
  void zero_grad();
  std::string shape_str() const;
};

using TensorPtr = std::shared_ptr<Tensor>;

void zero_grads(std::span<const TensorPtr> params);

/// Tape of executed primitive operations. Ops run eagerly and record a
/// backward closure; backward() replays the tape in exact reverse order.
/// Each backward pass computes adjoints in scratch buffers and then adds
/// them into every touched tensor's grad, so repeated calls accumulate.
class Graph {
 public:
  // out[b,j] = sum_i in[b,i] * w[i,j] + bias[j]
  TensorPtr dense(const TensorPtr& input, const TensorPtr& weight,
                  const TensorPtr& bias);
  TensorPtr relu(const TensorPtr& t);
  TensorPtr sigmoid(const TensorPtr& t);
  // row-wise softmax with per-row max subtraction; input must have >= 2 cols
  TensorPtr softmax(const TensorPtr& t);
  // ln(clamp(v, eps, 1)); gradient is 1/v inside [eps, 1], 0 outside
  TensorPtr log_clamped(const TensorPtr& t, double eps);
  TensorPtr add(const TensorPtr& a, const TensorPtr& b);
  TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
  // k * t + c, elementwise
  TensorPtr affine(const TensorPtr& t, double k, double c);
  // out[b] = t[b, idx[b]]
  TensorPtr pick(const TensorPtr& t, const std::vector<std::size_t>& idx);
  TensorPtr sum(const TensorPtr& t);
  TensorPtr mean(const TensorPtr& t);
  // out[b] = sum_j t[b,j]
  TensorPtr row_sum(const TensorPtr& t);
  // [n x 1] -> [n]
  TensorPtr squeeze(const TensorPtr& t);

  /// Accumulates d(loss)/d(tensor) into .grad of every tensor on the tape.
  /// loss must be a scalar produced by this graph's recorded operations.
  void backward(const TensorPtr& loss);

  void clear();
  std::size_t tape_size() const { return tape_.size(); }

 private:
  struct Op {
    TensorPtr output;
    std::function<void()> backprop;
  };
  std::vector<Op> tape_;
  std::unordered_map<const Tensor*, std::vector<double>> adjoints_;
  std::vector<TensorPtr> touched_;

  std::vector<double>& adj(const TensorPtr& t);
  const std::vector<double>* adj_if_any(const TensorPtr& t) const;
  void record(TensorPtr output, std::function<void()> backprop);
};

/// Max relative error between analytic gradients and central finite
/// differences, over all elements of params. build_loss must construct the
/// scalar loss from the current parameter values on the given graph.
/// epsilon must lie in [1e-7, 1e-3].
double grad_check(std::span<const TensorPtr> params,
                  const std::function<TensorPtr(Graph&)>& build_loss,
                  double epsilon);

}  // namespace appealnet
