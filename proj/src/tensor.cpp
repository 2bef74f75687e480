#include "appealnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace appealnet {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

void require_same_shape(const TensorPtr& a, const TensorPtr& b,
                        const char* op) {
  if (a->shape != b->shape) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a->shape_str() + " vs " + b->shape_str());
  }
}

}  // namespace

TensorPtr Tensor::zeros(std::vector<std::size_t> shape, std::string name) {
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->values.assign(shape_product(t->shape), 0.0);
  t->grad.assign(t->values.size(), 0.0);
  t->name = std::move(name);
  return t;
}

TensorPtr Tensor::from(std::vector<std::size_t> shape,
                       std::vector<double> values, std::string name) {
  if (shape_product(shape) != values.size()) {
    throw std::invalid_argument("Tensor::from: " +
                                std::to_string(values.size()) +
                                " values do not fill the given shape");
  }
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->values = std::move(values);
  t->grad.assign(t->values.size(), 0.0);
  t->name = std::move(name);
  return t;
}

TensorPtr Tensor::scalar(double v, std::string name) {
  return from({1}, {v}, std::move(name));
}

std::size_t Tensor::rows() const { return shape.empty() ? 1 : shape[0]; }

std::size_t Tensor::cols() const {
  if (shape.size() < 2) return shape.empty() ? 1 : 1;
  return shape[1];
}

double& Tensor::at(std::size_t r, std::size_t c) {
  return values[r * cols() + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return values[r * cols() + c];
}

void Tensor::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

std::string Tensor::shape_str() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  return os.str();
}

void zero_grads(std::span<const TensorPtr> params) {
  for (const auto& p : params) p->zero_grad();
}

std::vector<double>& Graph::adj(const TensorPtr& t) {
  auto it = adjoints_.find(t.get());
  if (it == adjoints_.end()) {
    it = adjoints_.emplace(t.get(), std::vector<double>(t->size(), 0.0)).first;
    touched_.push_back(t);
  }
  return it->second;
}

const std::vector<double>* Graph::adj_if_any(const TensorPtr& t) const {
  auto it = adjoints_.find(t.get());
  return it == adjoints_.end() ? nullptr : &it->second;
}

void Graph::record(TensorPtr output, std::function<void()> backprop) {
  tape_.push_back(Op{std::move(output), std::move(backprop)});
}

TensorPtr Graph::dense(const TensorPtr& input, const TensorPtr& weight,
                       const TensorPtr& bias) {
  if (input->shape.size() != 2 || weight->shape.size() != 2 ||
      bias->shape.size() != 1 || input->shape[1] != weight->shape[0] ||
      bias->shape[0] != weight->shape[1]) {
    throw std::invalid_argument("dense: input " + input->shape_str() +
                                " incompatible with weight " +
                                weight->shape_str() + " and bias " +
                                bias->shape_str());
  }
  std::size_t n = input->shape[0], in = input->shape[1], out = weight->shape[1];
  auto y = Tensor::zeros({n, out});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t j = 0; j < out; ++j) {
      double acc = bias->values[j];
      for (std::size_t i = 0; i < in; ++i) {
        acc += input->values[b * in + i] * weight->values[i * out + j];
      }
      y->values[b * out + j] = acc;
    }
  }
  record(y, [this, input, weight, bias, y, n, in, out]() {
    const auto* gy = adj_if_any(y);
    if (!gy) return;
    auto& gx = adj(input);
    auto& gw = adj(weight);
    auto& gb = adj(bias);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t j = 0; j < out; ++j) {
        double g = (*gy)[b * out + j];
        gb[j] += g;
        for (std::size_t i = 0; i < in; ++i) {
          gx[b * in + i] += g * weight->values[i * out + j];
          gw[i * out + j] += g * input->values[b * in + i];
        }
      }
    }
  });
  return y;
}

TensorPtr Graph::relu(const TensorPtr& t) {
  auto y = Tensor::zeros(t->shape);
  for (std::size_t i = 0; i < t->size(); ++i) {
    y->values[i] = t->values[i] > 0.0 ? t->values[i] : 0.0;
  }
  record(y, [this, t, y]() {
    const auto* gy = adj_if_any(y);
    if (!gy) return;
    auto& gx = adj(t);
    for (std::size_t i = 0; i < t->size(); ++i) {
      if (t->values[i] > 0.0) gx[i] += (*gy)[i];
    }
  });
  return y;
}

TensorPtr Graph::sigmoid(const TensorPtr& t) {
  auto y = Tensor::zeros(t->shape);
  for (std::size_t i = 0; i < t->size(); ++i) {
    double x = t->values[i];
    // branch keeps exp() argument nonpositive
    y->values[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                            : std::exp(x) / (1.0 + std::exp(x));
  }
  record(y, [this, t, y]() {
    const auto* gy = adj_if_any(y);
    if (!gy) return;
    auto& gx = adj(t);
    for (std::size_t i = 0; i < t->size(); ++i) {
      double s = y->values[i];
      gx[i] += (*gy)[i] * s * (1.0 - s);
    }
  });
  return y;
}

TensorPtr Graph::softmax(const TensorPtr& t) {
  if (t->shape.size() != 2 || t->shape[1] < 2) {
    throw std::invalid_argument("softmax: needs [n x K] input with K >= 2, got " +
                                t->shape_str());
  }
  for (double v : t->values) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("softmax: non-finite input value");
    }
  }
  std::size_t n = t->shape[0], k = t->shape[1];
  auto y = Tensor::zeros(t->shape);
  for (std::size_t b = 0; b < n; ++b) {
    double m = t->values[b * k];
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, t->values[b * k + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double e = std::exp(t->values[b * k + j] - m);
      y->values[b * k + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < k; ++j) y->values[b * k + j] /= z;
  }
  record(y, [this, t, y, n, k]() {
    const auto* gy = adj_if_any(y);
    if (!gy) return;
    auto& gx = adj(t);
    for (std::size_t b = 0; b < n; ++b) {
      double dot = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        dot += (*gy)[b * k + j] * y->values[b * k + j];
      }
      for (std::size_t j = 0; j < k; ++j) {
        gx[b * k + j] += y->values[b * k + j] * ((*gy)[b * k + j] - dot);
      }
    }
  });
  return y;
}

TensorPtr Graph::log_clamped(const TensorPtr& t, double eps) {
  if (!(eps > 0.0)) {
    throw std::invalid_argument("log_clamped: eps must be positive");
  }
  auto y = Tensor::zeros(t->shape);
  for (std::size_t i = 0; i < t->size(); ++i) {
    y->values[i] = std::log(std::clamp(t->values[i], eps, 1.0));
  }
  record(y, [this, t, y, eps]() {
    const auto* gy = adj_if_any(y);
    if (!gy) return;
    auto& gx = adj(t);
    for (std::size_t i = 0; i < t->size(); ++i) {
      double v = t->values[i];
      if (v >= eps && v <= 1.0) gx[i] += (*gy)[i] / v;
    }
  });
  return y;
}

TensorPtr Graph::add(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape(a, b, "add");
  auto y = Tensor::zeros(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) {
    y->values[i] = a->values[i] + b->values[i];
  }
  record(y, [this, a, b, y]() {
    const auto* gy = adj_if_any(y);
    if (!gy) return;
    auto& ga = adj(a);
    auto& gb = adj(b);
    for (std::size_t i = 0; i < y->size(); ++i) {
      ga[i] += (*gy)[i];
      gb[i] += (*gy)[i];
    }
  });
  return y;
}

TensorPtr Graph::mul(const TensorPtr& a, const TensorPtr& b) {
  require_same_shape(a, b, "mul");
  auto y = Tensor::zeros(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) {
    y->values[i] = a->values[i] * b->values[i];
  }
  record(y, [this, a, b, y]() {
    const auto* gy = adj_if_any(y);
    if (!gy) return;
    auto& ga = adj(a);
    auto& gb = adj(b);
    for (std::size_t i = 0; i < y->size(); ++i) {
      ga[i] += (*gy)[i] * b->values[i];
      gb[i] += (*gy)[i] * a->values[i];
    }
  });
  return y;
}

TensorPtr Graph::affine(const TensorPtr& t, double k, double c) {
  auto y = Tensor::zeros(t->shape);
  for (std::size_t i = 0; i < t->size(); ++i) {
    y->values[i] = k * t->values[i] + c;
  }
  record(y, [this, t, y, k]() {
    const auto* gy = adj_if_any(y);
    if (!gy) return;
    auto& gx = adj(t);
    for (std::size_t i = 0; i < t->size(); ++i) gx[i] += k * (*gy)[i];
  });
  return y;
}

TensorPtr Graph::pick(const TensorPtr& t, const std::vector<std::size_t>& idx) {
  if (t->shape.size() != 2 || idx.size() != t->shape[0]) {
    throw std::invalid_argument("pick: need [n x K] input and n indices, got " +
                                t->shape_str() + " with " +
                                std::to_string(idx.size()) + " indices");
  }
  std::size_t n = t->shape[0], k = t->shape[1];
  for (std::size_t b = 0; b < n; ++b) {
    if (idx[b] >= k) {
      throw std::out_of_range("pick: index " + std::to_string(idx[b]) +
                              " out of range for " + std::to_string(k) +
                              " columns (row " + std::to_string(b) + ")");
    }
  }
  auto y = Tensor::zeros({n});
  for (std::size_t b = 0; b < n; ++b) y->values[b] = t->values[b * k + idx[b]];
  record(y, [this, t, y, idx, n, k]() {
    const auto* gy = adj_if_any(y);
    if (!gy) return;
    auto& gx = adj(t);
    for (std::size_t b = 0; b < n; ++b) gx[b * k + idx[b]] += (*gy)[b];
  });
  return y;
}

TensorPtr Graph::sum(const TensorPtr& t) {
  auto y = Tensor::zeros({1});
  double acc = 0.0;
  for (double v : t->values) acc += v;
  y->values[0] = acc;
  record(y, [this, t, y]() {
    const auto* gy = adj_if_any(y);
    if (!gy) return;
    auto& gx = adj(t);
    for (std::size_t i = 0; i < t->size(); ++i) gx[i] += (*gy)[0];
  });
  return y;
}

TensorPtr Graph::mean(const TensorPtr& t) {
  if (t->size() == 0) throw std::invalid_argument("mean: empty tensor");
  auto y = Tensor::zeros({1});
  double acc = 0.0;
  for (double v : t->values) acc += v;
  double inv = 1.0 / static_cast<double>(t->size());
  y->values[0] = acc * inv;
  record(y, [this, t, y, inv]() {
    const auto* gy = adj_if_any(y);
    if (!gy) return;
    auto& gx = adj(t);
    for (std::size_t i = 0; i < t->size(); ++i) gx[i] += (*gy)[0] * inv;
  });
  return y;
}

TensorPtr Graph::row_sum(const TensorPtr& t) {
  if (t->shape.size() != 2) {
    throw std::invalid_argument("row_sum: need [n x m] input, got " +
                                t->shape_str());
  }
  std::size_t n = t->shape[0], m = t->shape[1];
  auto y = Tensor::zeros({n});
  for (std::size_t b = 0; b < n; ++b) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += t->values[b * m + j];
    y->values[b] = acc;
  }
  record(y, [this, t, y, n, m]() {
    const auto* gy = adj_if_any(y);
    if (!gy) return;
    auto& gx = adj(t);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t j = 0; j < m; ++j) gx[b * m + j] += (*gy)[b];
    }
  });
  return y;
}

TensorPtr Graph::squeeze(const TensorPtr& t) {
  if (t->shape.size() != 2 || t->shape[1] != 1) {
    throw std::invalid_argument("squeeze: need [n x 1] input, got " +
                                t->shape_str());
  }
  auto y = Tensor::zeros({t->shape[0]});
  y->values = t->values;
  record(y, [this, t, y]() {
    const auto* gy = adj_if_any(y);
    if (!gy) return;
    auto& gx = adj(t);
    for (std::size_t i = 0; i < t->size(); ++i) gx[i] += (*gy)[i];
  });
  return y;
}

void Graph::backward(const TensorPtr& loss) {
  if (loss->size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                loss->shape_str());
  }
  adjoints_.clear();
  touched_.clear();
  adj(loss)[0] = 1.0;
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
    it->backprop();
  }
  for (const auto& t : touched_) {
    const auto& a = adjoints_[t.get()];
    for (std::size_t i = 0; i < t->size(); ++i) t->grad[i] += a[i];
  }
  adjoints_.clear();
  touched_.clear();
}

void Graph::clear() {
  tape_.clear();
  adjoints_.clear();
  touched_.clear();
}

double grad_check(std::span<const TensorPtr> params,
                  const std::function<TensorPtr(Graph&)>& build_loss,
                  double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw std::invalid_argument("grad_check: epsilon must be in [1e-7, 1e-3]");
  }
  zero_grads(params);
  {
    Graph g;
    auto loss = build_loss(g);
    g.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p->grad);

  auto eval = [&]() {
    Graph g;
    return build_loss(g)->values[0];
  };

  double max_err = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    for (std::size_t i = 0; i < p->size(); ++i) {
      double saved = p->values[i];
      p->values[i] = saved + epsilon;
      double lp = eval();
      p->values[i] = saved - epsilon;
      double lm = eval();
      p->values[i] = saved;
      if (!std::isfinite(lp) || !std::isfinite(lm)) {
        throw std::runtime_error(
            "grad_check: non-finite loss while perturbing parameter '" +
            (p->name.empty() ? "#" + std::to_string(pi) : p->name) +
            "' element " + std::to_string(i));
      }
      double fd = (lp - lm) / (2.0 * epsilon);
      double err = std::abs(analytic[pi][i] - fd) / std::max(1.0, std::abs(fd));
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

}  // namespace appealnet
