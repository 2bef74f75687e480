#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>

#include "appealnet/model.hpp"
#include "appealnet/rng.hpp"

using namespace appealnet;

namespace {

ArchSpec small_spec() {
  ArchSpec spec;
  spec.input_dim = 4;
  spec.extractor_widths = {8};
  spec.approx_widths = {8, 3};
  return spec;
}

std::vector<double> random_block(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

}  // namespace

TEST_CASE("two-head forward shapes and probability contracts") {
  auto net = insert_predictor_head(ApproximatorNet::init(small_spec(), 3), 4);
  Rng rng(11);
  std::size_t m = 5;
  auto out = net.infer(random_block(rng, m * 4), m, 4);
  REQUIRE(out.probs.size() == m * 3);
  REQUIRE(out.q.size() == m);
  for (std::size_t i = 0; i < m; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 3; ++j) sum += out.probs[i * 3 + j];
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out.q[i] > 0.0);
    CHECK(out.q[i] < 1.0);
  }
}

TEST_CASE("zeroed parameters give uniform probs and q = 0.5") {
  auto net = insert_predictor_head(ApproximatorNet::init(small_spec(), 3), 4);
  for (auto& p : net.parameters()) {
    std::fill(p->values.begin(), p->values.end(), 0.0);
  }
  Rng rng(12);
  auto out = net.infer(random_block(rng, 3 * 4), 3, 4);
  for (double v : out.probs) CHECK(v == 1.0 / 3.0);
  for (double v : out.q) CHECK(v == 0.5);
}

TEST_CASE("forward is deterministic for fixed seed and input") {
  Rng rng(13);
  auto input = random_block(rng, 4 * 4);
  auto a = insert_predictor_head(ApproximatorNet::init(small_spec(), 7), 8)
               .infer(input, 4, 4);
  auto b = insert_predictor_head(ApproximatorNet::init(small_spec(), 7), 8)
               .infer(input, 4, 4);
  CHECK(a.probs == b.probs);
  CHECK(a.q == b.q);
}

TEST_CASE("batch width mismatch is a dimension error") {
  auto net = insert_predictor_head(ApproximatorNet::init(small_spec(), 3), 4);
  std::vector<double> bad(3 * 5, 0.0);
  CHECK_THROWS_AS(net.infer(bad, 3, 5), std::invalid_argument);
}

TEST_CASE("insert_predictor_head reuses pretrained parameters bitwise") {
  auto pretrained = ApproximatorNet::init(small_spec(), 21);
  Rng rng(14);
  auto input = random_block(rng, 6 * 4);
  auto before = pretrained.infer(input, 6, 4);

  auto two_head = insert_predictor_head(pretrained, 99);
  auto after = two_head.infer(input, 6, 4);
  REQUIRE(before.probs.size() == after.probs.size());
  CHECK(std::memcmp(before.probs.data(), after.probs.data(),
                    before.probs.size() * sizeof(double)) == 0);
}

TEST_CASE("zero-initialized predictor head gives q = 0.5 everywhere") {
  auto two_head = insert_predictor_head(ApproximatorNet::init(small_spec(), 2), 5);
  std::fill(two_head.predictor_head().weight->values.begin(),
            two_head.predictor_head().weight->values.end(), 0.0);
  Rng rng(15);
  auto out = two_head.infer(random_block(rng, 4 * 4), 4, 4);
  for (double v : out.q) CHECK(v == 0.5);
}

TEST_CASE("different predictor seeds: identical probs, different q") {
  auto pretrained = ApproximatorNet::init(small_spec(), 33);
  auto a = insert_predictor_head(pretrained, 1);
  auto b = insert_predictor_head(pretrained, 2);
  Rng rng(16);
  auto input = random_block(rng, 5 * 4);
  auto oa = a.infer(input, 5, 4);
  auto ob = b.infer(input, 5, 4);
  CHECK(oa.probs == ob.probs);
  CHECK(oa.q != ob.q);
}

TEST_CASE("heads are separated: predictor params never move probs and vice versa") {
  auto net = insert_predictor_head(ApproximatorNet::init(small_spec(), 44), 45);
  Rng rng(17);
  auto input = random_block(rng, 5 * 4);
  auto base = net.infer(input, 5, 4);

  auto perturbed = net.clone();
  for (auto& p : perturbed.predictor_parameters()) {
    for (auto& v : p->values) v += 0.37;
  }
  auto out = perturbed.infer(input, 5, 4);
  CHECK(out.probs == base.probs);
  CHECK(out.q != base.q);

  auto perturbed2 = net.clone();
  for (auto& l : perturbed2.approximator().approx_head()) {
    for (auto& v : l.weight->values) v += 0.37;
  }
  auto out2 = perturbed2.infer(input, 5, 4);
  CHECK(out2.q == base.q);
  CHECK(out2.probs != base.probs);
}

TEST_CASE("count_flops per-layer arithmetic") {
  ArchSpec tiny;
  tiny.input_dim = 1;
  tiny.approx_widths = {1};
  tiny.task = TaskKind::Regression;
  CHECK(count_flops(tiny, false) == 3);  // 2*1*1 + 1

  ArchSpec d43;
  d43.input_dim = 4;
  d43.approx_widths = {3};
  CHECK(count_flops(d43, false) == 27);  // 2*4*3 + 3

  ArchSpec ext;
  ext.input_dim = 4;
  ext.extractor_widths = {8};
  ext.approx_widths = {3};
  CHECK(count_flops(ext, false) == 72 + 51);  // (2*4*8+8) + (2*8*3+3)
  CHECK(count_flops(ext, true) == 72 + 51 + 17);  // + predictor 8 -> 1
}

TEST_CASE("count_flops is additive and monotone in widths") {
  Rng rng(18);
  for (int trial = 0; trial < 30; ++trial) {
    ArchSpec spec;
    spec.input_dim = 1 + rng.index(6);
    std::size_t layers = rng.index(3);
    for (std::size_t i = 0; i < layers; ++i) {
      spec.extractor_widths.push_back(1 + rng.index(8));
    }
    spec.approx_widths = {1 + rng.index(8), 2 + rng.index(5)};

    auto base = count_flops(spec);
    ArchSpec wider = spec;
    if (!wider.extractor_widths.empty()) {
      wider.extractor_widths[rng.index(wider.extractor_widths.size())] += 1;
    } else {
      wider.approx_widths[0] += 1;
    }
    CHECK(count_flops(wider) > base);

    ArchSpec wider2 = spec;
    wider2.approx_widths.back() += 1;
    CHECK(count_flops(wider2) > base);
  }
}

TEST_CASE("profile_select picks the largest fitting architecture") {
  ArchSpec a;
  a.input_dim = 4;
  a.approx_widths = {3};  // 27 without predictor
  ArchSpec b;
  b.input_dim = 4;
  b.extractor_widths = {8};
  b.approx_widths = {3};  // 123 without predictor
  std::vector<std::pair<std::string, ArchSpec>> pool{{"A", a}, {"B", b}};

  CHECK(profile_select(pool, 200, false) == "B");
  CHECK(profile_select(pool, 50, false) == "A");
  CHECK_THROWS_AS(profile_select(pool, 10, false), NoArchitectureFits);
  CHECK_THROWS_AS(profile_select({}, 100, false), std::invalid_argument);

  // ties break by pool order
  std::vector<std::pair<std::string, ArchSpec>> tied{{"first", a}, {"second", a}};
  CHECK(profile_select(tied, 100, false) == "first");
}

TEST_CASE("checkpoint round-trip is value exact") {
  auto net = insert_predictor_head(ApproximatorNet::init(small_spec(), 91), 92);
  std::string path = "test_models_ckpt.json";
  save_checkpoint(net, path);
  auto loaded = load_two_head(path);
  CHECK(loaded.spec() == net.spec());
  auto pa = net.parameters();
  auto pb = loaded.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->values == pb[i]->values);
  }
  CHECK_THROWS_AS(load_approximator(path), std::runtime_error);
  std::remove(path.c_str());

  auto approx = ApproximatorNet::init(small_spec(), 7);
  save_checkpoint(approx, path);
  auto loaded2 = load_approximator(path);
  auto qa = approx.parameters();
  auto qb = loaded2.parameters();
  REQUIRE(qa.size() == qb.size());
  for (std::size_t i = 0; i < qa.size(); ++i) {
    CHECK(qa[i]->values == qb[i]->values);
  }
  CHECK_THROWS_AS(load_two_head(path), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("arch validation") {
  ArchSpec bad;
  bad.input_dim = 4;
  bad.approx_widths = {1};  // K = 1 for classification
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.approx_widths = {};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.input_dim = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
