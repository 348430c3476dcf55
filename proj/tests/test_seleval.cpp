#include <doctest.h>

#include <random>

#include "cclsc/errors.hpp"
#include "cclsc/seleval.hpp"
#include "oracles.hpp"

using namespace cclsc;

namespace {

ScoredPredictions fixture() {
  // scores (0.9, 0.8, 0.7, 0.6), correctness (T, T, F, T)
  return {{0.9, 1, 1}, {0.8, 0, 0}, {0.7, 2, 1}, {0.6, 1, 1}};
}

}  // namespace

TEST_CASE("score_dataset examples") {
  auto net = zeros_like(make_network<double>(3, {4}, 2, 4, 1));
  const MatrixXd x = MatrixXd::Random(5, 3);
  const auto scored = score_dataset(net, x, {0, 1, 2, 3, 0}, 4);
  REQUIRE(scored.size() == 5);
  for (const auto& s : scored) {
    CHECK(s.confidence == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(s.predicted == 0);
  }

  Network<double> fixed;
  fixed.embedding.push_back({MatrixXd::Identity(2, 2), VectorXd::Zero(2)});
  MatrixXd cls(3, 2);
  cls << 1, 0, 0, 1, 0.5, 0.5;
  fixed.classifier = {cls, VectorXd::Zero(3)};
  MatrixXd pts(2, 2);
  pts << 2, 0, 0.3, 1.0;
  const auto s2 = score_dataset(fixed, pts, {0, 2}, 3);
  for (Eigen::Index i = 0; i < 2; ++i) {
    const VectorXd logits = cls * pts.row(i).transpose();
    const VectorXd p = oracle::naive_softmax(logits);
    CHECK(s2[i].confidence == doctest::Approx(p.maxCoeff()).epsilon(1e-14));
    CHECK(s2[i].predicted == static_cast<int>(argmax(p)));
  }
  CHECK(s2[0].correct());
  CHECK_FALSE(s2[1].correct());

  CHECK(score_dataset(net, MatrixXd::Random(1, 3), {2}, 4).size() == 1);
}

TEST_CASE("score_dataset drops an abstention output") {
  auto net = make_network<double>(3, {}, 4, 5, 2);
  const MatrixXd x = MatrixXd::Random(4, 3);
  const auto scored = score_dataset(net, x, {0, 1, 2, 3}, 4);
  const auto rec = forward(net, x);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const VectorXd p = oracle::naive_softmax(rec.logits.row(i).head(4).transpose());
    CHECK(scored[i].confidence == doctest::Approx(p.maxCoeff()).epsilon(1e-13));
  }
}

TEST_CASE("threshold_for_coverage examples") {
  const std::vector<double> s{0.9, 0.8, 0.7, 0.6};
  CHECK(threshold_for_coverage(s, 0.5) == 0.8);
  CHECK(coverage_and_risk(fixture(), 0.8).realized_coverage == 0.5);
  CHECK(threshold_for_coverage(s, 1.0) == 0.6);
  CHECK(threshold_for_coverage({0.5, 0.5, 0.5, 0.5}, 0.25) == 0.5);
  CHECK_THROWS_AS(threshold_for_coverage(s, 0.0), ConfigError);
  CHECK_THROWS_AS(threshold_for_coverage(s, 1.5), ConfigError);
  CHECK_THROWS(threshold_for_coverage({}, 0.5));
}

TEST_CASE("coverage_and_risk examples") {
  const auto preds = fixture();
  const auto full = coverage_and_risk(preds, 0.6);
  CHECK(full.realized_coverage == 1.0);
  CHECK(full.selective_risk == 0.25);

  const auto p = coverage_and_risk(preds, 0.7);
  CHECK(p.realized_coverage == 0.75);
  CHECK(p.selective_risk == doctest::Approx(1.0 / 3));
  CHECK(p.selected == 3);
  CHECK(p.errors == 1);

  CHECK(coverage_and_risk(preds, 0.8).selective_risk == 0.0);
  CHECK_THROWS_AS(coverage_and_risk(preds, 0.95), UndefinedRiskError);
}

TEST_CASE("risk_coverage_curve examples") {
  const auto preds = fixture();
  const auto one = risk_coverage_curve(preds, {1.0});
  REQUIRE(one.size() == 1);
  CHECK(one[0].selective_risk == 0.25);

  const auto curve = risk_coverage_curve(preds, {0.5, 0.75, 1.0});
  REQUIRE(curve.size() == 3);
  CHECK(curve[0].selective_risk == 0.0);
  CHECK(curve[1].selective_risk == doctest::Approx(1.0 / 3));
  CHECK(curve[2].selective_risk == 0.25);

  // All errors ranked below all correct predictions.
  ScoredPredictions ranked;
  for (int i = 0; i < 20; ++i) ranked.push_back({1.0 - 0.04 * i, i < 15 ? 0 : 1, 0});
  const auto rc = risk_coverage_curve(ranked, default_coverage_grid());
  for (std::size_t i = 1; i < rc.size(); ++i) CHECK(rc[i].selective_risk <= rc[i - 1].selective_risk);
}

TEST_CASE("selection properties on random predictions") {
  std::mt19937_64 rng(30);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> cls(0, 2), levels(0, 9);
  for (int trial = 0; trial < 50; ++trial) {
    ScoredPredictions preds;
    std::vector<double> scores;
    const int n = 5 + trial;
    std::size_t correct = 0;
    for (int i = 0; i < n; ++i) {
      // coarse scores so ties are common
      const double s = 0.1 * levels(rng) + 0.05;
      preds.push_back({s, cls(rng), cls(rng)});
      scores.push_back(s);
      correct += preds.back().correct() ? 1 : 0;
    }
    for (double c : default_coverage_grid()) {
      const double h = threshold_for_coverage(scores, c);
      const auto pt = coverage_and_risk(preds, h);
      CHECK(pt.realized_coverage >= c);
      std::size_t ties = 0;
      for (double s : scores) ties += s == h ? 1 : 0;
      CHECK(pt.realized_coverage - c <= static_cast<double>(ties) / n + 1e-12);
      CHECK(pt.selective_risk == static_cast<double>(pt.errors) / static_cast<double>(pt.selected));
    }
    const auto full = coverage_and_risk(preds, *std::min_element(scores.begin(), scores.end()));
    CHECK(full.selected == static_cast<std::size_t>(n));
    CHECK(full.errors == n - correct);
    CHECK(std::abs(full.selective_risk - (1.0 - static_cast<double>(correct) / n)) <= 1e-15);

    std::size_t prev = 0;
    for (double h = 1.0; h >= 0.0; h -= 0.05) {
      std::size_t sel = 0;
      for (double s : scores) sel += s >= h ? 1 : 0;
      CHECK(sel >= prev);
      prev = sel;
    }
    const auto a = risk_coverage_curve(preds, default_coverage_grid());
    const auto b = risk_coverage_curve(preds, default_coverage_grid());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].selective_risk == b[i].selective_risk);
  }
}

TEST_CASE("rank_sum_test examples") {
  const auto same = rank_sum_test({0.3, 0.1, 0.2}, {0.3, 0.1, 0.2});
  CHECK(same.u_statistic == 4.5);
  CHECK(same.p_value >= 0.99);

  const auto sep = rank_sum_test({1, 2, 3}, {10, 20, 30});
  CHECK(sep.u_statistic == 0.0);
  CHECK(sep.p_value == doctest::Approx(0.0809).epsilon(1e-3));
  CHECK(oracle::exact_rank_sum_p({1, 2, 3}, {10, 20, 30}) == doctest::Approx(0.1));

  CHECK(rank_sum_test({1, 2}, {1, 2}).p_value >= 0.99);
  CHECK(rank_sum_test({5, 5, 5}, {5, 5}).p_value == 1.0);
  CHECK_THROWS_AS(rank_sum_test({1}, {1, 2}), ConfigError);
}

TEST_CASE("rank_sum_test is symmetric in its arguments") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> v(0, 6);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(4), b(5);
    for (auto& x : a) x = v(rng);
    for (auto& x : b) x = v(rng);
    const auto ab = rank_sum_test(a, b), ba = rank_sum_test(b, a);
    CHECK(ab.p_value == doctest::Approx(ba.p_value).epsilon(1e-12));
    CHECK(ab.u_statistic + ba.u_statistic == doctest::Approx(20.0));
    CHECK(ab.p_value <= 1.0);
    CHECK(ab.p_value > 0.0);
  }
}
