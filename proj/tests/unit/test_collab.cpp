#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "appealnet/collab.hpp"
#include "appealnet/losses.hpp"
#include "appealnet/rng.hpp"

using namespace appealnet;

namespace {

ArchSpec tiny_arch(std::size_t d, std::size_t k) {
  ArchSpec arch;
  arch.input_dim = d;
  arch.extractor_widths = {6};
  arch.approx_widths = {k};
  return arch;
}

Dataset random_dataset(Rng& rng, std::size_t n, std::size_t d, std::size_t k) {
  Dataset data;
  data.n = n;
  data.d = d;
  data.num_classes = k;
  data.features.resize(n * d);
  for (auto& v : data.features) v = rng.uniform(-2.0, 2.0);
  data.labels.resize(n);
  for (auto& y : data.labels) y = static_cast<int>(rng.index(k));
  return data;
}

// independently coded metric enumeration over raw outputs: routing rule,
// SR/AR, overall accuracy, overall cost
struct BruteForce {
  double sr, ar, acc_sys, acc_small, acc_big, cost, ad;
};

BruteForce brute_force(const std::vector<double>& scores,
                       const std::vector<int>& small_pred,
                       const std::vector<int>& big_pred,
                       const std::vector<int>& labels, bool oracle,
                       double delta, double c1, double c0) {
  std::size_t n = scores.size();
  double edge_count = 0.0, sys_ok = 0.0, small_ok = 0.0, big_ok = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    bool edge = scores[i] >= delta;
    bool ok1 = small_pred[i] == labels[i];
    bool ok0 = oracle || big_pred[i] == labels[i];
    if (edge) edge_count += 1.0;
    if (edge ? ok1 : ok0) sys_ok += 1.0;
    if (ok1) small_ok += 1.0;
    if (ok0) big_ok += 1.0;
  }
  BruteForce b;
  b.sr = edge_count / double(n);
  b.ar = 1.0 - b.sr;
  b.acc_sys = sys_ok / double(n);
  b.acc_small = small_ok / double(n);
  b.acc_big = big_ok / double(n);
  b.cost = b.sr * c1 + (1.0 - b.sr) * c0;
  b.ad = b.acc_big - b.acc_sys;
  return b;
}

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

}  // namespace

TEST_CASE("route threshold rule with edge ties") {
  CHECK(route(0.5, 0.5) == Route::Edge);
  CHECK(route(0.49, 0.5) == Route::Cloud);
  CHECK(route(0.0, 0.0) == Route::Edge);
  CHECK(route(1.0, 1.0 + 1e-9) == Route::Cloud);
}

TEST_CASE("cost model invariants") {
  CHECK_THROWS_AS(CostModel(2.0, 1.0, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(CostModel(0.0, 1.0, 0.5), std::invalid_argument);
  CostModel ok(1.0, 100.0, 50.0);
  CHECK(ok.c1 == 1.0);
}

TEST_CASE("budget_fraction boundaries and arithmetic") {
  CHECK(budget_fraction(CostModel(1.0, 100.0, 50.0)) ==
        doctest::Approx(50.0 / 99.0).epsilon(1e-15));

  // b -> c1 gives fraction -> 1, b -> c0 gives fraction -> 0
  double c1 = 1.0, c0 = 100.0;
  double tiny = 1e-13 * (c0 - c1);
  CHECK(std::abs(budget_fraction(CostModel(c1, c0, c1 + tiny)) - 1.0) <= 1e-12);
  CHECK(std::abs(budget_fraction(CostModel(c1, c0, c0 - tiny)) - 0.0) <= 1e-12);

  CHECK_THROWS_AS(budget_fraction(CostModel(1.0, 100.0, 0.5)),
                  std::invalid_argument);
  CHECK_THROWS_AS(budget_fraction(CostModel(1.0, 100.0, 100.5)),
                  std::invalid_argument);
}

TEST_CASE("paper arithmetic fixtures") {
  // Table-1 MFLOPs pair for the cost identity
  CHECK(std::abs(overall_cost(0.9, CostModel(94.6, 2520.3, 1000.0)) - 337.17) <=
        1e-9);
  // Table-1 accuracy pair for the relative improvement identity
  auto acc_i = acc_improvement(93.085, 92.40, 93.77);
  REQUIRE(acc_i.has_value());
  CHECK(std::abs(*acc_i - 0.5) <= 1e-9);
  // degenerate denominator reports undefined
  CHECK(!acc_improvement(0.9, 0.8, 0.8).has_value());
}

TEST_CASE("evaluate on a hand-enumerated instance") {
  // 3 samples with q = [0.9, 0.4, 0.6], delta = 0.5 -> SR = 2/3
  Rng rng(50);
  auto net = insert_predictor_head(ApproximatorNet::init(tiny_arch(2, 2), 51), 52);
  Dataset data = random_dataset(rng, 3, 2, 2);
  auto outs = net.infer(data.features, data.n, data.d);

  // pick a delta separating the actual q values 2:1
  std::vector<double> q = outs.q;
  std::sort(q.begin(), q.end());
  double delta = 0.5 * (q[0] + q[1]);

  RoutingPolicy policy{ScoreSource::PredictorQ, delta};
  auto report = evaluate(net, BigModel::oracle(), data, policy,
                         CostModel(1.0, 10.0, 5.0));
  CHECK(report.sr == doctest::Approx(2.0 / 3.0));
  CHECK(report.ar == 1.0 - report.sr);
  CHECK(report.n_samples == 3);
  CHECK(report.acc_big == 1.0);
}

TEST_CASE("evaluate equals the brute-force enumeration on random instances") {
  Rng rng(53);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n = 1 + rng.index(10);
    std::size_t k = 2 + rng.index(3);
    bool oracle = rng.index(2) == 0;
    Dataset data = random_dataset(rng, n, 2, k);
    auto net = insert_predictor_head(
        ApproximatorNet::init(tiny_arch(2, k), 1000 + trial), 2000 + trial);
    auto big_net = ApproximatorNet::init(tiny_arch(2, k), 3000 + trial);
    BigModel big = oracle ? BigModel::oracle() : BigModel::white_box(big_net.clone());

    ScoreSource source = static_cast<ScoreSource>(rng.index(4));
    auto small_out = net.infer(data.features, data.n, data.d);
    std::vector<double> scores(n);
    std::vector<int> small_pred(n), big_pred(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::span<const double> row{small_out.probs.data() + i * k, k};
      // the oracle recomputes its own scores from the probability rows
      switch (source) {
        case ScoreSource::PredictorQ: scores[i] = small_out.q[i]; break;
        case ScoreSource::Msp: {
          double best = row[0];
          for (double v : row) best = std::max(best, v);
          scores[i] = best;
          break;
        }
        case ScoreSource::ScoreMargin: {
          double b1 = -1.0, b2 = -1.0;
          for (double v : row) {
            if (v > b1) {
              b2 = b1;
              b1 = v;
            } else if (v > b2) {
              b2 = v;
            }
          }
          scores[i] = b1 - b2;
          break;
        }
        case ScoreSource::Entropy: {
          double e = 0.0;
          for (double v : row) {
            if (v > 0.0) e += v * std::log(v);
          }
          scores[i] = e;
          break;
        }
      }
      small_pred[i] = static_cast<int>(argmax(row));
    }
    if (!oracle) {
      auto big_out = big_net.infer(data.features, data.n, data.d);
      for (std::size_t i = 0; i < n; ++i) {
        std::span<const double> row{big_out.probs.data() + i * k, k};
        big_pred[i] = static_cast<int>(argmax(row));
      }
    }

    double delta = rng.uniform(-1.0, 1.5);
    double c1 = rng.uniform(0.5, 5.0);
    double c0 = c1 + rng.uniform(0.5, 50.0);
    auto expected = brute_force(scores, small_pred, big_pred, data.labels,
                                oracle, delta, c1, c0);
    auto report = evaluate(net, big, data, RoutingPolicy{source, delta},
                           CostModel(c1, c0, 0.5 * (c1 + c0)));

    CHECK(report.sr + report.ar == 1.0);
    CHECK(std::abs(report.sr - expected.sr) <= 1e-12);
    CHECK(std::abs(report.overall_accuracy - expected.acc_sys) <= 1e-12);
    CHECK(std::abs(report.acc_small - expected.acc_small) <= 1e-12);
    CHECK(std::abs(report.acc_big - expected.acc_big) <= 1e-12);
    CHECK(std::abs(report.cost - expected.cost) <= 1e-12);
    CHECK(std::abs(report.ad - expected.ad) <= 1e-12);
  }
}

TEST_CASE("delta extremes recover the standalone accuracies") {
  Rng rng(54);
  Dataset data = random_dataset(rng, 50, 2, 3);
  auto net = insert_predictor_head(ApproximatorNet::init(tiny_arch(2, 3), 55), 56);
  CostModel cost(1.0, 10.0, 5.0);

  auto low = evaluate(net, BigModel::oracle(), data,
                      RoutingPolicy{ScoreSource::PredictorQ, -1e18}, cost);
  CHECK(low.sr == 1.0);
  CHECK(low.overall_accuracy == low.acc_small);

  auto high = evaluate(net, BigModel::oracle(), data,
                       RoutingPolicy{ScoreSource::PredictorQ, 1e18}, cost);
  CHECK(high.sr == 0.0);
  CHECK(high.overall_accuracy == 1.0);  // oracle path

  auto big_net = ApproximatorNet::init(tiny_arch(2, 3), 57);
  auto high_wb = evaluate(net, BigModel::white_box(big_net.clone()), data,
                          RoutingPolicy{ScoreSource::PredictorQ, 1e18}, cost);
  CHECK(high_wb.overall_accuracy == high_wb.acc_big);
}

TEST_CASE("overall cost is strictly decreasing in SR") {
  CostModel cost(2.0, 20.0, 10.0);
  double prev = overall_cost(0.0, cost);
  for (double sr = 0.1; sr <= 1.0 + 1e-12; sr += 0.1) {
    double c = overall_cost(sr, cost);
    CHECK(c < prev);
    prev = c;
  }
}

TEST_CASE("AccI/AD consistency") {
  Rng rng(58);
  for (int trial = 0; trial < 100; ++trial) {
    double acc_small = rng.uniform(0.2, 0.9);
    double acc_big = acc_small + rng.uniform(0.01, 0.1);
    double acc_sys = rng.uniform(acc_small, 1.0);
    auto acc_i = acc_improvement(acc_sys, acc_small, acc_big);
    REQUIRE(acc_i.has_value());
    double ad = acc_big - acc_sys;
    CHECK(ad == doctest::Approx((1.0 - *acc_i) * (acc_big - acc_small)).epsilon(1e-10));
  }
}

TEST_CASE("sweep matches per-delta evaluation and SR is monotone") {
  Rng rng(59);
  Dataset data = random_dataset(rng, 60, 2, 2);
  auto net = insert_predictor_head(ApproximatorNet::init(tiny_arch(2, 2), 60), 61);
  CostModel cost(1.0, 10.0, 5.0);

  std::vector<double> deltas;
  for (int i = 0; i <= 22; ++i) deltas.push_back(1.1 * i / 22.0);
  auto reports = sweep_thresholds(net, BigModel::oracle(), data,
                                  ScoreSource::PredictorQ, cost, deltas);
  REQUIRE(reports.size() == deltas.size());
  CHECK(reports.front().sr == 1.0);
  CHECK(reports.back().sr == 0.0);
  for (std::size_t i = 0; i + 1 < reports.size(); ++i) {
    CHECK(reports[i].sr >= reports[i + 1].sr);
  }
  for (std::size_t i = 0; i < reports.size(); ++i) {
    auto single = evaluate(net, BigModel::oracle(), data,
                           RoutingPolicy{ScoreSource::PredictorQ, deltas[i]}, cost);
    CHECK(reports[i].sr == single.sr);
    CHECK(reports[i].overall_accuracy == single.overall_accuracy);
    CHECK(reports[i].cost == single.cost);
  }

  std::vector<double> unsorted{0.5, 0.1};
  CHECK_THROWS_AS(sweep_thresholds(net, BigModel::oracle(), data,
                                   ScoreSource::PredictorQ, cost, unsorted),
                  std::invalid_argument);
}

TEST_CASE("find_delta_for_target against an exhaustive oracle") {
  Rng rng(62);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t n = 10;
    Dataset data = random_dataset(rng, n, 2, 2);
    auto net = insert_predictor_head(
        ApproximatorNet::init(tiny_arch(2, 2), 70 + trial), 80 + trial);
    AccuracyTarget target{AccuracyTarget::Kind::MaxAD, rng.uniform(0.0, 0.3)};
    const std::size_t grid = 101;

    double got = find_delta_for_target(net, BigModel::oracle(), data,
                                       ScoreSource::PredictorQ, target, grid);

    // test-local exhaustive search over the same documented grid
    auto scores = routing_scores(net, data, ScoreSource::PredictorQ);
    auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    double lo = *lo_it, hi = *hi_it;
    double span = hi - lo;
    double pad = span > 0.0 ? span / double(grid - 1) : 1e-9;
    CostModel cost(1.0, 2.0, 1.5);
    double best_sr = -1.0, best_delta = 0.0;
    bool found = false;
    for (std::size_t i = 0; i < grid; ++i) {
      double delta = i + 1 == grid ? hi + pad : lo + span * double(i) / double(grid - 1);
      auto rep = evaluate(net, BigModel::oracle(), data,
                          RoutingPolicy{ScoreSource::PredictorQ, delta}, cost);
      if (rep.ad <= target.value &&
          (rep.sr > best_sr || (rep.sr == best_sr && delta > best_delta))) {
        best_sr = rep.sr;
        best_delta = delta;
        found = true;
      }
    }
    REQUIRE(found);
    CHECK(got == doctest::Approx(best_delta).epsilon(1e-12));
  }
}

TEST_CASE("find_delta_for_target edge behaviors") {
  Rng rng(63);
  Dataset data = random_dataset(rng, 30, 2, 2);
  auto net = insert_predictor_head(ApproximatorNet::init(tiny_arch(2, 2), 64), 65);

  // AD <= 0 with the oracle: the all-cloud fallback always qualifies
  AccuracyTarget zero_ad{AccuracyTarget::Kind::MaxAD, 0.0};
  double delta = find_delta_for_target(net, BigModel::oracle(), data,
                                       ScoreSource::PredictorQ, zero_ad, 101);
  auto rep = evaluate(net, BigModel::oracle(), data,
                      RoutingPolicy{ScoreSource::PredictorQ, delta},
                      CostModel(1.0, 2.0, 1.5));
  CHECK(rep.ad <= 0.0);

  // a trivially satisfied target keeps everything on the edge
  AccuracyTarget loose{AccuracyTarget::Kind::MaxAD, 1.0};
  double cheap = find_delta_for_target(net, BigModel::oracle(), data,
                                       ScoreSource::PredictorQ, loose, 101);
  auto cheap_rep = evaluate(net, BigModel::oracle(), data,
                            RoutingPolicy{ScoreSource::PredictorQ, cheap},
                            CostModel(1.0, 2.0, 1.5));
  CHECK(cheap_rep.sr == 1.0);

  // an impossible AccI target raises
  AccuracyTarget impossible{AccuracyTarget::Kind::MinAccI, 5.0};
  CHECK_THROWS_AS(find_delta_for_target(net, BigModel::oracle(), data,
                                        ScoreSource::PredictorQ, impossible, 101),
                  TargetUnattainable);
}

TEST_CASE("score histogram partitions and conserves counts") {
  Rng rng(66);
  Dataset data = random_dataset(rng, 40, 2, 2);
  auto net = insert_predictor_head(ApproximatorNet::init(tiny_arch(2, 2), 67), 68);

  auto hist = score_histogram(net, data, ScoreSource::PredictorQ, 20);
  REQUIRE(hist.bin_left.size() == 20);
  std::size_t total = 0;
  for (std::size_t b = 0; b < 20; ++b) total += hist.correct[b] + hist.incorrect[b];
  CHECK(total == data.n);

  CHECK_THROWS_AS(score_histogram(net, data, ScoreSource::PredictorQ, 1),
                  std::invalid_argument);

  // all-correct labels empty the incorrect histogram
  auto outs = net.infer(data.features, data.n, data.d);
  Dataset aligned = data;
  for (std::size_t i = 0; i < data.n; ++i) {
    std::span<const double> row{outs.probs.data() + i * 2, 2};
    aligned.labels[i] = static_cast<int>(argmax(row));
  }
  auto hist2 = score_histogram(net, aligned, ScoreSource::PredictorQ, 10);
  for (auto c : hist2.incorrect) CHECK(c == 0);
}

TEST_CASE("score histogram on a hand-binned instance") {
  // 5 scores at known positions over 5 bins
  Rng rng(69);
  Dataset data = random_dataset(rng, 5, 2, 2);
  auto net = insert_predictor_head(ApproximatorNet::init(tiny_arch(2, 2), 90), 91);
  auto outs = net.infer(data.features, data.n, data.d);
  auto hist = score_histogram(net, data, ScoreSource::PredictorQ, 5);
  std::vector<std::size_t> expect_correct(5, 0), expect_incorrect(5, 0);
  for (std::size_t i = 0; i < 5; ++i) {
    auto b = std::min<std::size_t>(4, static_cast<std::size_t>(
                                          std::clamp(outs.q[i], 0.0, 1.0) * 5));
    std::span<const double> row{outs.probs.data() + i * 2, 2};
    bool ok = argmax(row) == static_cast<std::size_t>(data.labels[i]);
    if (ok) {
      ++expect_correct[b];
    } else {
      ++expect_incorrect[b];
    }
  }
  CHECK(hist.correct == expect_correct);
  CHECK(hist.incorrect == expect_incorrect);
}

TEST_CASE("auroc rank statistics") {
  CHECK(auroc({0.9, 0.8}, {0.1, 0.2}) == 1.0);
  CHECK(auroc({0.5, 0.5}, {0.5, 0.5}) == 0.5);
  CHECK(auroc({0.9, 0.3}, {0.5}) == 0.5);  // one win, one loss
  CHECK(auroc({0.1}, {0.9}) == 0.0);
  CHECK_THROWS_AS(auroc({}, {0.5}), std::invalid_argument);
  CHECK_THROWS_AS(auroc({0.5}, {}), std::invalid_argument);
}

TEST_CASE("auroc is invariant under strictly increasing transforms") {
  Rng rng(70);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t nc = 1 + rng.index(30), ni = 1 + rng.index(30);
    std::vector<double> c(nc), i(ni);
    for (auto& v : c) v = rng.uniform(-3.0, 3.0);
    for (auto& v : i) v = rng.uniform(-3.0, 3.0);
    double base = auroc(c, i);
    auto warp = [](double x) { return std::exp(0.5 * x) + x * x * x / 50.0 + x; };
    for (auto& v : c) v = warp(v);
    for (auto& v : i) v = warp(v);
    CHECK(auroc(c, i) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("regression evaluation") {
  auto [train, test] = generate(reg_synth(72));
  ArchSpec arch;
  arch.input_dim = 4;
  arch.extractor_widths = {8};
  arch.approx_widths = {2};
  arch.task = TaskKind::Regression;
  auto net = insert_predictor_head(ApproximatorNet::init(arch, 73), 74);
  CostModel cost(1.0, 10.0, 5.0);

  // err_threshold contract
  CHECK_THROWS_AS(evaluate_regression(net, test, 0.0,
                                      RoutingPolicy{ScoreSource::PredictorQ, 0.5},
                                      cost),
                  std::invalid_argument);
  // regression has no softmax baselines
  CHECK_THROWS_AS(evaluate_regression(net, test, 0.5,
                                      RoutingPolicy{ScoreSource::Msp, 0.5}, cost),
                  std::invalid_argument);

  // an infinite threshold makes everything accurate
  auto loose = evaluate_regression(net, test, 1e18,
                                   RoutingPolicy{ScoreSource::PredictorQ, 0.5},
                                   cost);
  CHECK(loose.overall_accuracy == 1.0);

  // delta beyond max q: all cloud, oracle accuracy 1
  auto all_cloud = evaluate_regression(net, test, 0.5,
                                       RoutingPolicy{ScoreSource::PredictorQ, 2.0},
                                       cost);
  CHECK(all_cloud.sr == 0.0);
  CHECK(all_cloud.overall_accuracy == 1.0);

  // the RMSE rule: residual [3,4] over 2 outputs -> rmse sqrt(25/2) ~ 3.54
  Dataset two;
  two.task = TaskKind::Regression;
  two.n = 1;
  two.d = 4;
  two.target_dim = 2;
  two.features = {0.1, 0.2, 0.3, 0.4};
  auto pred = net.infer(two.features, 1, 4);
  two.targets = {pred.probs[0] - 3.0, pred.probs[1] - 4.0};
  auto rep4 = evaluate_regression(net, two, 4.0,
                                  RoutingPolicy{ScoreSource::PredictorQ, -1.0},
                                  cost);
  CHECK(rep4.acc_small == 1.0);  // 3.536 < 4
  auto rep3 = evaluate_regression(net, two, 3.5,
                                  RoutingPolicy{ScoreSource::PredictorQ, -1.0},
                                  cost);
  CHECK(rep3.acc_small == 0.0);  // 3.536 >= 3.5
}

TEST_CASE("report serialization carries hash and undefined AccI") {
  EvalReport r;
  r.delta = 0.5;
  r.sr = 0.25;
  r.ar = 0.75;
  r.overall_accuracy = 0.9;
  r.acc_small = 0.8;
  r.acc_big = 0.8;
  r.acc_i = std::nullopt;
  r.ad = -0.1;
  r.cost = 12.0;
  r.n_samples = 4;
  std::string path = "test_collab_reports.csv";
  write_reports_csv({r}, {"q"}, path, "cafe", 9);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# config_hash=cafe seed=9");
  std::getline(in, line);  // header
  std::getline(in, line);
  CHECK(line == "q,0.5,0.25,0.75,0.9,0.8,0.8,,-0.1,12,4");
  std::remove(path.c_str());
}
