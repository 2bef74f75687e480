#include "appealnet/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "appealnet/rng.hpp"

namespace appealnet {

TensorPtr outputs_from_features(const ApproximatorNet& net, Graph& g,
                                const TensorPtr& feat);

namespace {

constexpr int kCheckpointVersion = 1;

DenseLayer init_layer(std::size_t in, std::size_t out, Rng& rng,
                      const std::string& name, bool zero_bias) {
  // fan-in scaled uniform init
  double bound = 1.0 / std::sqrt(static_cast<double>(in));
  auto w = Tensor::zeros({in, out}, name + ".w");
  for (auto& v : w->values) v = rng.uniform(-bound, bound);
  auto b = Tensor::zeros({out}, name + ".b");
  if (!zero_bias) {
    for (auto& v : b->values) v = rng.uniform(-bound, bound);
  }
  return DenseLayer{w, b};
}

DenseLayer clone_layer(const DenseLayer& l) {
  return DenseLayer{Tensor::from(l.weight->shape, l.weight->values,
                                 l.weight->name),
                    Tensor::from(l.bias->shape, l.bias->values, l.bias->name)};
}

std::uint64_t layer_flops(std::size_t in, std::size_t out) {
  return 2ull * in * out + out;
}

}  // namespace

std::size_t ArchSpec::output_dim() const {
  return approx_widths.empty() ? 0 : approx_widths.back();
}

std::size_t ArchSpec::num_classes() const { return output_dim(); }

std::size_t ArchSpec::feature_dim() const {
  return extractor_widths.empty() ? input_dim : extractor_widths.back();
}

void ArchSpec::validate() const {
  if (input_dim == 0) throw std::invalid_argument("ArchSpec: input_dim must be positive");
  if (approx_widths.empty()) {
    throw std::invalid_argument("ArchSpec: approximator head needs at least its output layer");
  }
  for (auto w : extractor_widths) {
    if (w == 0) throw std::invalid_argument("ArchSpec: zero extractor width");
  }
  for (auto w : approx_widths) {
    if (w == 0) throw std::invalid_argument("ArchSpec: zero approximator-head width");
  }
  if (task == TaskKind::Classification && output_dim() < 2) {
    throw std::invalid_argument("ArchSpec: classification needs K >= 2, got " +
                                std::to_string(output_dim()));
  }
}

std::string ArchSpec::describe() const {
  std::ostringstream os;
  os << "d=" << input_dim << " extractor=[";
  for (std::size_t i = 0; i < extractor_widths.size(); ++i) {
    if (i) os << ",";
    os << extractor_widths[i];
  }
  os << "] head=[";
  for (std::size_t i = 0; i < approx_widths.size(); ++i) {
    if (i) os << ",";
    os << approx_widths[i];
  }
  os << "] task="
     << (task == TaskKind::Classification ? "classification" : "regression");
  return os.str();
}

ApproximatorNet ApproximatorNet::init(const ArchSpec& spec,
                                      std::uint64_t seed) {
  spec.validate();
  ApproximatorNet net;
  net.spec_ = spec;
  Rng rng(derive_seed(seed, 0x417c));
  std::size_t in = spec.input_dim;
  for (std::size_t i = 0; i < spec.extractor_widths.size(); ++i) {
    std::size_t out = spec.extractor_widths[i];
    net.extractor_.push_back(
        init_layer(in, out, rng, "extractor" + std::to_string(i), false));
    in = out;
  }
  for (std::size_t i = 0; i < spec.approx_widths.size(); ++i) {
    std::size_t out = spec.approx_widths[i];
    net.approx_head_.push_back(
        init_layer(in, out, rng, "approx" + std::to_string(i), false));
    in = out;
  }
  return net;
}

TensorPtr ApproximatorNet::features(Graph& g, const TensorPtr& batch) const {
  if (batch->shape.size() != 2 || batch->shape[1] != spec_.input_dim) {
    throw std::invalid_argument("forward: batch " + batch->shape_str() +
                                " does not match input_dim " +
                                std::to_string(spec_.input_dim));
  }
  TensorPtr h = batch;
  for (const auto& layer : extractor_) {
    h = g.relu(g.dense(h, layer.weight, layer.bias));
  }
  return h;
}

TensorPtr ApproximatorNet::outputs(Graph& g, const TensorPtr& batch) const {
  return outputs_from_features(*this, g, features(g, batch));
}

// shared by ApproximatorNet::outputs and TwoHeadNet::forward so both heads
// consume the same extractor pass
TensorPtr outputs_from_features(const ApproximatorNet& net, Graph& g,
                                const TensorPtr& feat) {
  TensorPtr h = feat;
  const auto& head = net.approx_head();
  for (std::size_t i = 0; i < head.size(); ++i) {
    h = g.dense(h, head[i].weight, head[i].bias);
    if (i + 1 < head.size()) h = g.relu(h);
  }
  if (net.spec().task == TaskKind::Classification) h = g.softmax(h);
  return h;
}

std::vector<TensorPtr> ApproximatorNet::parameters() const {
  std::vector<TensorPtr> out;
  for (const auto& l : extractor_) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  for (const auto& l : approx_head_) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

ApproximatorNet ApproximatorNet::clone() const {
  ApproximatorNet net;
  net.spec_ = spec_;
  for (const auto& l : extractor_) net.extractor_.push_back(clone_layer(l));
  for (const auto& l : approx_head_) net.approx_head_.push_back(clone_layer(l));
  return net;
}

NetOutputs ApproximatorNet::infer(const std::vector<double>& features,
                                  std::size_t n, std::size_t d) const {
  Graph g;
  auto x = Tensor::from({n, d}, features);
  auto out = outputs(g, x);
  NetOutputs res;
  res.n = n;
  res.k = spec_.output_dim();
  res.probs = out->values;
  return res;
}

TwoHeadOutput TwoHeadNet::forward(Graph& g, const TensorPtr& batch) const {
  auto feat = approx_.features(g, batch);
  TwoHeadOutput out;
  out.probs = outputs_from_features(approx_, g, feat);
  out.q = g.squeeze(g.sigmoid(g.dense(feat, predictor_.weight, predictor_.bias)));
  return out;
}

NetOutputs TwoHeadNet::infer(const std::vector<double>& features,
                             std::size_t n, std::size_t d) const {
  Graph g;
  auto x = Tensor::from({n, d}, features);
  auto out = forward(g, x);
  NetOutputs res;
  res.n = n;
  res.k = spec().output_dim();
  res.probs = out.probs->values;
  res.q = out.q->values;
  return res;
}

std::vector<TensorPtr> TwoHeadNet::parameters() const {
  auto out = approx_.parameters();
  out.push_back(predictor_.weight);
  out.push_back(predictor_.bias);
  return out;
}

std::vector<TensorPtr> TwoHeadNet::approximator_parameters() const {
  return approx_.parameters();
}

std::vector<TensorPtr> TwoHeadNet::predictor_parameters() const {
  return {predictor_.weight, predictor_.bias};
}

TwoHeadNet TwoHeadNet::clone() const {
  TwoHeadNet net;
  net.approx_ = approx_.clone();
  net.predictor_ = clone_layer(predictor_);
  return net;
}

TwoHeadNet insert_predictor_head(const ApproximatorNet& pretrained,
                                 std::uint64_t seed) {
  TwoHeadNet net;
  net.approx_ = pretrained.clone();
  Rng rng(derive_seed(seed, 0x9edd));
  net.predictor_ =
      init_layer(pretrained.spec().feature_dim(), 1, rng, "predictor", true);
  return net;
}

BigModel BigModel::white_box(ApproximatorNet net) {
  BigModel m;
  m.net_ = std::move(net);
  return m;
}

BigModel BigModel::oracle() {
  BigModel m;
  m.oracle_ = true;
  return m;
}

const ApproximatorNet& BigModel::net() const {
  if (!net_) throw std::logic_error("BigModel: oracle has no network");
  return *net_;
}

NetOutputs BigModel::infer(const std::vector<double>& features, std::size_t n,
                           std::size_t d, const std::vector<int>& labels,
                           std::size_t num_classes) const {
  if (oracle_) {
    if (labels.size() != n) {
      throw std::invalid_argument("oracle: needs one label per sample");
    }
    NetOutputs res;
    res.n = n;
    res.k = num_classes;
    res.probs.assign(n * num_classes, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      res.probs[i * num_classes + static_cast<std::size_t>(labels[i])] = 1.0;
    }
    return res;
  }
  return net_->infer(features, n, d);
}

std::uint64_t count_flops(const ArchSpec& spec, bool include_predictor) {
  spec.validate();
  std::uint64_t total = 0;
  std::size_t in = spec.input_dim;
  for (auto out : spec.extractor_widths) {
    total += layer_flops(in, out);
    in = out;
  }
  std::size_t feat = in;
  for (auto out : spec.approx_widths) {
    total += layer_flops(in, out);
    in = out;
  }
  if (include_predictor) total += layer_flops(feat, 1);
  return total;
}

std::string profile_select(
    const std::vector<std::pair<std::string, ArchSpec>>& pool,
    std::uint64_t budget_flops, bool include_predictor) {
  if (pool.empty()) throw std::invalid_argument("profile_select: empty pool");
  const std::string* best = nullptr;
  std::uint64_t best_flops = 0;
  for (const auto& [name, spec] : pool) {
    std::uint64_t f = count_flops(spec, include_predictor);
    if (f <= budget_flops && (!best || f > best_flops)) {
      best = &name;
      best_flops = f;
    }
  }
  if (!best) {
    throw NoArchitectureFits("no architecture fits budget of " +
                             std::to_string(budget_flops) + " FLOPs");
  }
  return *best;
}

namespace {

using nlohmann::json;

json spec_to_json(const ArchSpec& s) {
  return json{{"input_dim", s.input_dim},
              {"extractor", s.extractor_widths},
              {"approx_head", s.approx_widths},
              {"task", s.task == TaskKind::Classification ? "classification"
                                                          : "regression"}};
}

ArchSpec spec_from_json(const json& j) {
  ArchSpec s;
  s.input_dim = j.at("input_dim").get<std::size_t>();
  s.extractor_widths = j.at("extractor").get<std::vector<std::size_t>>();
  s.approx_widths = j.at("approx_head").get<std::vector<std::size_t>>();
  std::string task = j.at("task").get<std::string>();
  if (task == "classification") {
    s.task = TaskKind::Classification;
  } else if (task == "regression") {
    s.task = TaskKind::Regression;
  } else {
    throw std::runtime_error("checkpoint: unknown task '" + task + "'");
  }
  return s;
}

json layer_to_json(const DenseLayer& l) {
  return json{{"in", l.weight->shape[0]},
              {"out", l.weight->shape[1]},
              {"w", l.weight->values},
              {"b", l.bias->values}};
}

DenseLayer layer_from_json(const json& j, const std::string& name) {
  std::size_t in = j.at("in").get<std::size_t>();
  std::size_t out = j.at("out").get<std::size_t>();
  DenseLayer l;
  l.weight = Tensor::from({in, out}, j.at("w").get<std::vector<double>>(),
                          name + ".w");
  l.bias = Tensor::from({out}, j.at("b").get<std::vector<double>>(),
                        name + ".b");
  return l;
}

json net_to_json(const ApproximatorNet& net, const DenseLayer* predictor) {
  json j;
  j["format"] = "appealnet-checkpoint";
  j["version"] = kCheckpointVersion;
  j["arch"] = spec_to_json(net.spec());
  j["has_predictor"] = predictor != nullptr;
  json ext = json::array();
  for (const auto& l : net.extractor()) ext.push_back(layer_to_json(l));
  json head = json::array();
  for (const auto& l : net.approx_head()) head.push_back(layer_to_json(l));
  j["extractor"] = ext;
  j["approx_head"] = head;
  if (predictor) j["predictor"] = layer_to_json(*predictor);
  return j;
}

json read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint: parse failure in " + path + ": " +
                             e.what());
  }
  if (j.value("format", "") != "appealnet-checkpoint") {
    throw std::runtime_error("checkpoint: " + path +
                             " is not an appealnet checkpoint");
  }
  if (j.value("version", -1) != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version in " + path);
  }
  return j;
}

ApproximatorNet approx_from_json(const json& j) {
  ApproximatorNet net;
  ArchSpec spec = spec_from_json(j.at("arch"));
  spec.validate();
  // rebuild through init to get names, then overwrite values
  net = ApproximatorNet::init(spec, 0);
  const auto& ext = j.at("extractor");
  const auto& head = j.at("approx_head");
  if (ext.size() != net.extractor().size() ||
      head.size() != net.approx_head().size()) {
    throw std::runtime_error("checkpoint: layer count does not match arch");
  }
  for (std::size_t i = 0; i < ext.size(); ++i) {
    net.extractor()[i] = layer_from_json(ext[i], "extractor" + std::to_string(i));
  }
  for (std::size_t i = 0; i < head.size(); ++i) {
    net.approx_head()[i] = layer_from_json(head[i], "approx" + std::to_string(i));
  }
  return net;
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace

void save_checkpoint(const ApproximatorNet& net, const std::string& path) {
  write_json(net_to_json(net, nullptr), path);
}

void save_checkpoint(const TwoHeadNet& net, const std::string& path) {
  write_json(net_to_json(net.approximator(), &net.predictor_head()), path);
}

ApproximatorNet load_approximator(const std::string& path) {
  json j = read_checkpoint(path);
  if (j.value("has_predictor", false)) {
    throw std::runtime_error("checkpoint: " + path +
                             " holds a two-head net, expected approximator-only");
  }
  return approx_from_json(j);
}

TwoHeadNet load_two_head(const std::string& path) {
  json j = read_checkpoint(path);
  if (!j.value("has_predictor", false)) {
    throw std::runtime_error("checkpoint: " + path +
                             " holds no predictor head, expected a two-head net");
  }
  TwoHeadNet net;
  net.approx_ = approx_from_json(j);
  net.predictor_ = layer_from_json(j.at("predictor"), "predictor");
  return net;
}

}  // namespace appealnet
