#include "appealnet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "appealnet/format.hpp"
#include "appealnet/rng.hpp"

namespace appealnet {

namespace {

double stable_sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

void check_spec(const SynthSpec& spec) {
  if (spec.d == 0) throw std::invalid_argument("generate: d must be positive");
  if (!(spec.noise_std >= 0.0) || !(spec.overlap >= 0.0)) {
    throw std::invalid_argument("generate: noise_std and overlap must be >= 0");
  }
  if (spec.kind == SynthKind::RegressionSurface) {
    if (spec.n < 5) throw std::invalid_argument("generate: need n >= 5 samples");
    if (spec.k == 0) throw std::invalid_argument("generate: target dim must be positive");
  } else {
    if (spec.k < 2) throw std::invalid_argument("generate: need K >= 2 classes");
    if (spec.n < 2) throw std::invalid_argument("generate: need n >= 2 per class");
  }
  if (spec.kind != SynthKind::RegressionSurface && spec.blobs_per_class == 0) {
    throw std::invalid_argument("generate: blobs_per_class must be positive");
  }
  if (!spec.centers.empty() &&
      spec.centers.size() != spec.k * spec.blobs_per_class * spec.d) {
    throw std::invalid_argument(
        "generate: centers must be (K * blobs_per_class) x d");
  }
  if (spec.centers.empty() && spec.kind == SynthKind::GaussianBlobs &&
      spec.blobs_per_class != 1) {
    throw std::invalid_argument(
        "generate: multi-blob classes need explicit centers");
  }
}

std::vector<double> auto_centers(const SynthSpec& spec) {
  // scaled basis vectors; min pairwise distance = overlap * noise_std
  if (spec.k > spec.d) {
    throw std::invalid_argument(
        "generate: automatic center placement needs K <= d (" +
        std::to_string(spec.k) + " > " + std::to_string(spec.d) +
        "); pass explicit centers instead");
  }
  double scale = spec.overlap * spec.noise_std / std::numbers::sqrt2;
  std::vector<double> centers(spec.k * spec.d, 0.0);
  for (std::size_t c = 0; c < spec.k; ++c) centers[c * spec.d + c] = scale;
  return centers;
}

Dataset classification_shell(const SynthSpec& spec, std::size_t n) {
  Dataset d;
  d.task = TaskKind::Classification;
  d.n = n;
  d.d = spec.d;
  d.num_classes = spec.k;
  d.features.resize(n * spec.d);
  d.labels.resize(n);
  return d;
}

std::pair<Dataset, Dataset> split_80_20(Dataset full, std::uint64_t seed) {
  std::size_t n = full.n;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x5971));
  rng.shuffle(order);
  std::size_t n_test = n / 5;
  std::size_t n_train = n - n_test;

  auto take = [&](std::size_t begin, std::size_t count, const char* tag) {
    Dataset part;
    part.task = full.task;
    part.n = count;
    part.d = full.d;
    part.num_classes = full.num_classes;
    part.target_dim = full.target_dim;
    part.split = tag;
    part.features.reserve(count * full.d);
    for (std::size_t i = begin; i < begin + count; ++i) {
      std::size_t src = order[i];
      part.features.insert(part.features.end(),
                           full.features.begin() + src * full.d,
                           full.features.begin() + (src + 1) * full.d);
      if (full.task == TaskKind::Classification) {
        part.labels.push_back(full.labels[src]);
      } else {
        part.targets.insert(part.targets.end(),
                            full.targets.begin() + src * full.target_dim,
                            full.targets.begin() + (src + 1) * full.target_dim);
      }
    }
    return part;
  };

  return {take(0, n_train, "train"), take(n_train, n_test, "test")};
}

Dataset gaussian_blobs(const SynthSpec& spec) {
  std::vector<double> centers =
      spec.centers.empty() ? auto_centers(spec) : spec.centers;
  std::size_t blobs = spec.centers.empty() ? 1 : spec.blobs_per_class;
  if (spec.hetero) {
    if (spec.hetero->scaled_dim >= spec.d || spec.hetero->gate_dim >= spec.d) {
      throw std::invalid_argument("generate: hetero noise dims out of range");
    }
    for (int c : spec.hetero->classes) {
      if (c < 0 || static_cast<std::size_t>(c) >= spec.k) {
        throw std::invalid_argument("generate: hetero class out of range");
      }
    }
  }
  Dataset full = classification_shell(spec, spec.n * spec.k);
  Rng rng(derive_seed(spec.seed, 0xb10b));
  std::size_t row = 0;
  for (std::size_t c = 0; c < spec.k; ++c) {
    bool hetero_class =
        spec.hetero && std::find(spec.hetero->classes.begin(),
                                 spec.hetero->classes.end(),
                                 static_cast<int>(c)) != spec.hetero->classes.end();
    for (std::size_t i = 0; i < spec.n; ++i, ++row) {
      // even mixture over the class's blobs
      std::size_t b = i % blobs;
      const double* center = centers.data() + (c * blobs + b) * spec.d;
      double* x = full.features.data() + row * spec.d;
      for (std::size_t j = 0; j < spec.d; ++j) {
        x[j] = center[j] + spec.noise_std * rng.normal();
      }
      if (hetero_class) {
        const auto& h = *spec.hetero;
        double scale =
            h.lo + (h.hi - h.lo) *
                       stable_sigmoid(h.sharpness * (x[h.gate_dim] - h.gate_offset));
        double noise = x[h.scaled_dim] - center[h.scaled_dim];
        x[h.scaled_dim] = center[h.scaled_dim] + noise * scale;
      }
      full.labels[row] = static_cast<int>(c);
    }
  }
  return full;
}

Dataset concentric_rings(const SynthSpec& spec) {
  if (spec.d < 2) {
    throw std::invalid_argument("generate: concentric rings need d >= 2");
  }
  Dataset full = classification_shell(spec, spec.n * spec.k);
  Rng rng(derive_seed(spec.seed, 0x4149));
  double gap = spec.overlap * spec.noise_std;
  std::size_t row = 0;
  for (std::size_t c = 0; c < spec.k; ++c) {
    double radius = gap * static_cast<double>(c + 1);
    for (std::size_t i = 0; i < spec.n; ++i, ++row) {
      double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      double r = radius + spec.noise_std * rng.normal();
      double* x = full.features.data() + row * spec.d;
      x[0] = r * std::cos(theta);
      x[1] = r * std::sin(theta);
      for (std::size_t j = 2; j < spec.d; ++j) x[j] = spec.noise_std * rng.normal();
      full.labels[row] = static_cast<int>(c);
    }
  }
  return full;
}

Dataset regression_surface(const SynthSpec& spec) {
  Dataset full;
  full.task = TaskKind::Regression;
  full.n = spec.n;
  full.d = spec.d;
  full.target_dim = spec.k;
  full.features.resize(spec.n * spec.d);
  full.targets.resize(spec.n * spec.k);
  Rng rng(derive_seed(spec.seed, 0x4e64));
  for (std::size_t i = 0; i < spec.n; ++i) {
    double* x = full.features.data() + i * spec.d;
    for (std::size_t j = 0; j < spec.d; ++j) x[j] = rng.uniform(-1.0, 1.0);
    // noise scale grows smoothly with x0; inputs left of ~0.3 are nearly clean
    double sigma = spec.noise_std * (0.05 + 0.95 * stable_sigmoid(8.0 * (x[0] - 0.3)));
    for (std::size_t j = 0; j < spec.k; ++j) {
      double base = std::tanh(2.0 * x[j % spec.d]) +
                    0.3 * std::sin(std::numbers::pi * x[(j + 1) % spec.d]);
      full.targets[i * spec.k + j] = base + sigma * rng.normal();
    }
  }
  return full;
}

}  // namespace

void Dataset::validate() const {
  if (n == 0) throw std::invalid_argument("Dataset: empty");
  if (features.size() != n * d) throw std::invalid_argument("Dataset: feature block size mismatch");
  for (double v : features) {
    if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite feature");
  }
  if (task == TaskKind::Classification) {
    if (labels.size() != n) throw std::invalid_argument("Dataset: label count mismatch");
    for (int y : labels) {
      if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
        throw std::invalid_argument("Dataset: label " + std::to_string(y) +
                                    " outside [0, " + std::to_string(num_classes) + ")");
      }
    }
  } else if (targets.size() != n * target_dim) {
    throw std::invalid_argument("Dataset: target block size mismatch");
  }
}

std::pair<Dataset, Dataset> generate(const SynthSpec& spec) {
  check_spec(spec);
  Dataset full;
  switch (spec.kind) {
    case SynthKind::GaussianBlobs: full = gaussian_blobs(spec); break;
    case SynthKind::ConcentricRings: full = concentric_rings(spec); break;
    case SynthKind::RegressionSurface: full = regression_surface(spec); break;
  }
  auto parts = split_80_20(std::move(full), spec.seed);
  parts.first.validate();
  parts.second.validate();
  return parts;
}

SynthSpec std_synth(std::uint64_t seed) {
  SynthSpec spec;
  spec.kind = SynthKind::GaussianBlobs;
  spec.n = 500;
  spec.d = 8;
  spec.k = 4;
  spec.overlap = 1.0;
  spec.noise_std = 1.0;
  spec.seed = seed;
  // classes 0/1 far out on axis 0; classes 2/3 one base std apart on axis 1
  spec.centers.assign(spec.k * spec.d, 0.0);
  spec.centers[0 * spec.d + 0] = 6.0;
  spec.centers[1 * spec.d + 0] = -6.0;
  spec.centers[2 * spec.d + 1] = 0.5;
  spec.centers[3 * spec.d + 1] = -0.5;
  // axis-2 drives how noisy the overlap pair is: near-clean on one side,
  // far noisier than the base pair on the other
  HeteroNoise h;
  h.scaled_dim = 1;
  h.gate_dim = 2;
  h.lo = 0.15;
  h.hi = 3.2;
  h.sharpness = 12.0;
  h.gate_offset = 0.0;
  h.classes = {2, 3};
  spec.hetero = h;
  return spec;
}

SynthSpec reg_synth(std::uint64_t seed) {
  SynthSpec spec;
  spec.kind = SynthKind::RegressionSurface;
  spec.n = 2500;
  spec.d = 4;
  spec.k = 2;
  spec.noise_std = 1.0;
  spec.seed = seed;
  return spec;
}

double reg_synth_err_threshold() { return 0.5; }

std::vector<double> one_hot(int label, std::size_t k) {
  if (label < 0 || static_cast<std::size_t>(label) >= k) {
    throw std::invalid_argument("one_hot: label " + std::to_string(label) +
                                " outside [0, " + std::to_string(k) + ")");
  }
  std::vector<double> v(k, 0.0);
  v[static_cast<std::size_t>(label)] = 1.0;
  return v;
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& tok, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw std::runtime_error("csv: line " + std::to_string(line_no) +
                             ": cannot parse '" + tok + "' as a number");
  }
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  if (schema.d == 0) throw std::invalid_argument("load_csv: schema d must be positive");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);

  std::size_t value_cols =
      schema.task == TaskKind::Classification ? 1 : schema.target_dim;
  std::size_t total_cols = schema.d + value_cols;

  Dataset data;
  data.task = schema.task;
  data.d = schema.d;
  data.num_classes = schema.num_classes;
  data.target_dim = schema.task == TaskKind::Regression ? schema.target_dim : 0;

  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto toks = split_commas(line);
    if (!header_seen) {
      header_seen = true;
      if (toks.size() != total_cols) {
        throw std::runtime_error("csv: line 1: expected " +
                                 std::to_string(total_cols) +
                                 " header columns, found " +
                                 std::to_string(toks.size()));
      }
      continue;
    }
    if (toks.size() != total_cols) {
      throw std::runtime_error("csv: line " + std::to_string(line_no) +
                               ": expected " + std::to_string(total_cols) +
                               " columns, found " + std::to_string(toks.size()));
    }
    for (std::size_t j = 0; j < schema.d; ++j) {
      data.features.push_back(parse_double(toks[j], line_no));
    }
    if (schema.task == TaskKind::Classification) {
      double raw = parse_double(toks[schema.d], line_no);
      int y = static_cast<int>(raw);
      if (static_cast<double>(y) != raw || y < 0 ||
          static_cast<std::size_t>(y) >= schema.num_classes) {
        throw std::runtime_error(
            "csv: row " + std::to_string(data.n + 1) + " (line " +
            std::to_string(line_no) + "): label '" + toks[schema.d] +
            "' outside [0, " + std::to_string(schema.num_classes) + ")");
      }
      data.labels.push_back(y);
    } else {
      for (std::size_t j = 0; j < schema.target_dim; ++j) {
        data.targets.push_back(parse_double(toks[schema.d + j], line_no));
      }
    }
    ++data.n;
  }
  if (!header_seen) throw std::runtime_error("csv: " + path + " is empty");
  data.validate();
  return data;
}

void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write " + path);
  for (std::size_t j = 0; j < data.d; ++j) {
    if (j) out << ",";
    out << "f" << j;
  }
  if (data.task == TaskKind::Classification) {
    out << ",y\n";
  } else {
    for (std::size_t j = 0; j < data.target_dim; ++j) out << ",t" << j;
    out << "\n";
  }
  for (std::size_t i = 0; i < data.n; ++i) {
    for (std::size_t j = 0; j < data.d; ++j) {
      if (j) out << ",";
      out << format_double(data.features[i * data.d + j]);
    }
    if (data.task == TaskKind::Classification) {
      out << "," << data.labels[i] << "\n";
    } else {
      for (std::size_t j = 0; j < data.target_dim; ++j) {
        out << "," << format_double(data.targets[i * data.target_dim + j]);
      }
      out << "\n";
    }
  }
}

}  // namespace appealnet
