#include <doctest.h>

#include <random>

#include "cclsc/losses.hpp"
#include "oracles.hpp"

using namespace cclsc;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

CscContext<double> random_ctx(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dim(2, 8), np(1, 5), nn(0, 6);
  std::uniform_real_distribution<double> sr(0.1, 1.0), tau(0.1, 1.0);
  const int e = dim(rng);
  CscContext<double> ctx;
  ctx.anchor_z = oracle::random_unit(rng, e);
  ctx.sr = sr(rng);
  ctx.tau = tau(rng);
  ctx.positives = oracle::random_units(rng, np(rng), e);
  ctx.negatives = oracle::random_units(rng, nn(rng), e);
  return ctx;
}

// Context with one positive and one negative of prescribed similarity to z = e_0.
CscContext<double> two_sample_ctx(double sr, double tau, double sim_p, double sim_n) {
  auto unit_with = [](double s) {
    MatrixXd m(1, 2);
    m << s, std::sqrt(1 - s * s);
    return m;
  };
  return {vec({1, 0}), sr, unit_with(sim_p), unit_with(sim_n), tau};
}

}  // namespace

TEST_CASE("cross_entropy examples") {
  CHECK(cross_entropy<double>(vec({0, 1, 0}), 1).loss == 0.0);
  CHECK(cross_entropy<double>(VectorXd::Constant(4, 0.25), 2).loss == doctest::Approx(std::log(4.0)));
  const auto r = cross_entropy<double>(vec({0.5, 0.3, 0.2}), 1);
  CHECK(r.loss == doctest::Approx(1.2039728043).epsilon(1e-10));
  CHECK(r.grad_logits(0) == doctest::Approx(0.5));
  CHECK(r.grad_logits(1) == doctest::Approx(-0.7));
  CHECK(r.grad_logits(2) == doctest::Approx(0.2));
  CHECK(cross_entropy<double>(vec({1, 0}), 1).loss == doctest::Approx(-std::log(kLogClamp)));
  CHECK_THROWS_AS(cross_entropy<double>(vec({1, 0}), 2), InputError);
}

TEST_CASE("sr_confidence and entropy examples") {
  CHECK(sr_confidence<double>(VectorXd::Constant(5, 0.2)) == doctest::Approx(0.2));
  CHECK(sr_confidence<double>(vec({0, 1, 0})) == 1.0);
  CHECK(sr_confidence<double>(vec({0.5, 0.3, 0.2})) == 0.5);
  CHECK(entropy<double>(vec({0, 1, 0})) == 0.0);
  CHECK(entropy<double>(VectorXd::Constant(6, 1.0 / 6)) == doctest::Approx(std::log(6.0)).epsilon(1e-14));
  CHECK(entropy<double>(vec({0.5, 0.5})) == doctest::Approx(0.6931471806));
}

TEST_CASE("csc_loss examples") {
  MatrixXd one(1, 2);
  one << 0.6, 0.8;
  CHECK(csc_loss<double>({vec({1, 0}), 0.37, one, MatrixXd(0, 2), 0.1}) == doctest::Approx(0.0));
  CHECK(csc_loss(two_sample_ctx(1.0, 0.1, 0.4, 0.4)) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  const double expected = 0.8 * std::log1p(std::exp(-8.0));
  CHECK(expected == doctest::Approx(2.683e-4).epsilon(1e-3));
  CHECK(csc_loss(two_sample_ctx(0.8, 0.1, 0.9, 0.1)) == doctest::Approx(expected).epsilon(1e-12));
  CHECK_THROWS_AS(csc_loss<double>({vec({1, 0}), 1.0, MatrixXd(0, 2), one, 0.1}), EmptyPositiveSetError);
}

TEST_CASE("csc_loss agrees with the naive formula and stays finite at small tau") {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 200; ++t) {
    const auto ctx = random_ctx(rng);
    CHECK(csc_loss(ctx) == doctest::Approx(oracle::naive_csc(ctx.anchor_z, ctx.sr, ctx.positives, ctx.negatives, ctx.tau))
                               .epsilon(1e-10));
  }
  auto ctx = random_ctx(rng);
  ctx.tau = 1e-4;
  CHECK(std::isfinite(csc_loss(ctx)));
  CHECK(csc_grad_anchor(ctx).allFinite());
}

TEST_CASE("csc_grad_anchor matches a fourth-order finite difference") {
  std::mt19937_64 rng(11);
  double worst = 0;
  for (int t = 0; t < 500; ++t) {
    const auto ctx = random_ctx(rng);
    auto f = [&](const VectorXd& z) {
      auto c = ctx;
      c.anchor_z = z;
      return oracle::naive_csc(c.anchor_z, c.sr, c.positives, c.negatives, c.tau);
    };
    const VectorXd numeric = oracle::central_diff4(f, ctx.anchor_z, 1e-3 * ctx.tau);
    worst = std::max(worst, oracle::relative_error(csc_grad_anchor(ctx), numeric));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("csc_grad_anchor examples") {
  MatrixXd one(1, 3);
  one << 0, 1, 0;
  const VectorXd g = csc_grad_anchor<double>({vec({1, 0, 0}), 0.9, one, MatrixXd(0, 3), 0.1});
  CHECK(g.norm() == 0.0);

  const double low = csc_grad_anchor(two_sample_ctx(1.0, 0.1, 0.5, 0.1)).norm();
  const double high = csc_grad_anchor(two_sample_ctx(1.0, 0.1, 0.5, 0.4)).norm();
  CHECK(high > low);
}

TEST_CASE("csc properties") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 300; ++t) {
    auto ctx = random_ctx(rng);
    const double base = csc_loss(ctx);
    CHECK(base >= 0.0);

    auto scaled = ctx;
    scaled.sr = 1.0;
    const double unit = csc_loss(scaled);
    if (unit > 0) CHECK(std::abs(base / unit - ctx.sr) < 1e-12);

    if (ctx.negatives.rows() > 0) {
      auto fewer = ctx;
      fewer.negatives = ctx.negatives.topRows(ctx.negatives.rows() - 1);
      CHECK(csc_loss(fewer) <= base + 1e-15);
    }
  }
}

TEST_CASE("margin_gamma, selective_loss_l0 and max_hinge_loss examples") {
  CHECK(margin_gamma<double>(vec({0, 0, 1}), 2) == 1.0);
  CHECK(margin_gamma<double>(VectorXd::Constant(4, 0.25), 3) == 0.0);
  CHECK(margin_gamma<double>(vec({0.5, 0.3, 0.2}), 0) == doctest::Approx(0.2));

  CHECK(selective_loss_l0(true, 0.9, 0.5, 0.7) == 0.0);
  CHECK(selective_loss_l0(false, 0.9, 0.5, 0.7) == 1.0);
  CHECK(selective_loss_l0(true, 0.4, 0.5, 0.7) == 0.7);
  CHECK(selective_loss_l0(false, 0.4, 0.5, 0.7) == 0.7);

  const MarginParams<double> mp;
  CHECK(max_hinge_loss(1.0, 3.0, mp) == 0.0);
  CHECK(max_hinge_loss(0.0, 1.0, mp) == 1.0);
  CHECK(max_hinge_loss(-1.0, 0.0, mp) == 2.0);
  MarginParams<double> bad;
  bad.rho = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("max-hinge upper-bounds the selective 0/1 loss") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u01(0, 1), pos(0.05, 3.0);
  std::bernoulli_distribution coin(0.5);
  int checked = 0;
  for (int t = 0; t < 20000; ++t) {
    MarginParams<double> mp{pos(rng), pos(rng), pos(rng), pos(rng), pos(rng)};
    const double lambda = mp.lambda * u01(rng);
    const bool correct = coin(rng);
    const double g = u01(rng), h = u01(rng);
    const double gamma = correct ? 2 * u01(rng) - 1 : -u01(rng);
    CHECK(max_hinge_loss(g - h, gamma, mp) >= selective_loss_l0(correct, g, h, lambda));
    ++checked;
  }
  CHECK(checked >= 10000);
}

TEST_CASE("sat_em_loss examples") {
  const VectorXd p = vec({0.1, 0.6, 0.2, 0.1});
  const auto sat = sat_em_loss<double>(p, 1.0, 1, 0.0);
  const auto ce = cross_entropy<double>(p, 1);
  CHECK(sat.loss == ce.loss);
  CHECK(sat.grad_logits == ce.grad_logits);

  CHECK(sat_em_loss<double>(vec({0, 0, 1}), 0.0, 0, 0.0).loss == 0.0);
  CHECK_THROWS_AS(sat_em_loss<double>(p, 1.0, 3, 0.0), InputError);
}

TEST_CASE("sat_em_loss with t=1 and beta=0 equals cross-entropy bitwise") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-4, 4);
  for (int t = 0; t < 500; ++t) {
    VectorXd z(5);
    for (Eigen::Index j = 0; j < 5; ++j) z(j) = u(rng);
    const VectorXd p = softmax_rows(z.transpose()).transpose();
    const int y = t % 4;
    const auto a = sat_em_loss<double>(p, 1.0, y, 0.0);
    const auto b = cross_entropy<double>(p, y);
    CHECK(a.loss == b.loss);
    CHECK(a.grad_logits == b.grad_logits);
  }
}

TEST_CASE("sat_em_loss gradient matches finite differences in the logits") {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(-3, 3), u01(0, 1);
  double worst = 0;
  for (int t = 0; t < 300; ++t) {
    const int k = 2 + t % 5;
    VectorXd z(k + 1);
    for (Eigen::Index j = 0; j <= k; ++j) z(j) = u(rng);
    const double ty = u01(rng), beta = u01(rng);
    const int y = t % k;
    auto f = [&](const VectorXd& logits) {
      const VectorXd p = oracle::naive_softmax(logits);
      double h = 0;
      for (Eigen::Index j = 0; j < p.size(); ++j) h -= p(j) * std::log(p(j));
      return -ty * std::log(p(y)) - (1 - ty) * std::log(p(k)) + beta * h;
    };
    const VectorXd p = oracle::naive_softmax(z);
    worst = std::max(worst, oracle::relative_error(sat_em_loss<double>(p, ty, y, beta).grad_logits,
                                                   oracle::central_diff(f, z, 1e-5)));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("sat_target_update examples") {
  const VectorXd t = sat_target_update<double>(vec({1, 0}), vec({0, 1}), 0.5);
  CHECK(t(0) == 0.5);
  CHECK(t(1) == 0.5);
  const VectorXd f = vec({0.2, 0.3, 0.5});
  CHECK((sat_target_update<double>(f, f, 0.9) - f).norm() < 1e-16);

  VectorXd cur = vec({1, 0, 0});
  const double m = 0.9;
  double prev = (cur - f).norm();
  for (int i = 0; i < 50; ++i) {
    cur = sat_target_update<double>(cur, f, m);
    const double d = (cur - f).norm();
    CHECK(d == doctest::Approx(m * prev).epsilon(1e-9));
    prev = d;
  }
  CHECK_THROWS_AS(sat_target_update<double>(vec({1, 0}), f, 0.9), ConfigError);
}
