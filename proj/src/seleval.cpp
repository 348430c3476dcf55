#include "cclsc/seleval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cclsc/errors.hpp"
#include "cclsc/losses.hpp"

namespace cclsc {

std::vector<double> default_coverage_grid() {
  return {1.0, 0.95, 0.9, 0.85, 0.8, 0.75, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};
}

ScoredPredictions score_probabilities(const MatrixXd& class_probs, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != class_probs.rows())
    throw ConfigError("label count does not match probability rows");
  ScoredPredictions out(labels.size());
  for (Eigen::Index i = 0; i < class_probs.rows(); ++i) {
    auto& row = out[static_cast<std::size_t>(i)];
    row.confidence = class_probs.row(i).maxCoeff();
    row.predicted = static_cast<int>(argmax(class_probs.row(i)));
    row.truth = labels[static_cast<std::size_t>(i)];
  }
  return out;
}

ScoredPredictions score_dataset(const Network<double>& params, const MatrixXd& features,
                                const std::vector<int>& labels, int k) {
  const auto rec = forward(params, features);
  return score_probabilities(class_probabilities(rec, k), labels);
}

double threshold_for_coverage(const std::vector<double>& scores, double target) {
  if (scores.empty()) throw InputError("cannot calibrate a threshold on zero scores");
  if (!(target > 0 && target <= 1)) throw ConfigError("target coverage must lie in (0, 1]");
  const auto n = scores.size();
  // Smallest count j with j / n >= target, evaluated in the same arithmetic
  // the coverage check uses.
  auto j = static_cast<std::size_t>(std::ceil(target * static_cast<double>(n)));
  j = std::clamp<std::size_t>(j, 1, n);
  while (j > 1 && static_cast<double>(j - 1) / static_cast<double>(n) >= target) --j;
  while (j < n && static_cast<double>(j) / static_cast<double>(n) < target) ++j;

  std::vector<double> sorted = scores;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(j - 1), sorted.end(),
                   std::greater<>());
  return sorted[j - 1];
}

RiskCoveragePoint coverage_and_risk(const ScoredPredictions& preds, double h) {
  RiskCoveragePoint pt;
  pt.threshold = h;
  for (const auto& p : preds) {
    if (p.confidence >= h) {
      ++pt.selected;
      if (!p.correct()) ++pt.errors;
    }
  }
  if (pt.selected == 0) throw UndefinedRiskError("no sample has confidence at or above the threshold");
  pt.realized_coverage = static_cast<double>(pt.selected) / static_cast<double>(preds.size());
  pt.selective_risk = static_cast<double>(pt.errors) / static_cast<double>(pt.selected);
  return pt;
}

std::vector<RiskCoveragePoint> risk_coverage_curve(const ScoredPredictions& preds,
                                                   const std::vector<double>& targets) {
  std::vector<double> scores(preds.size());
  std::transform(preds.begin(), preds.end(), scores.begin(), [](const auto& p) { return p.confidence; });
  std::vector<RiskCoveragePoint> curve;
  curve.reserve(targets.size());
  for (double t : targets) {
    auto pt = coverage_and_risk(preds, threshold_for_coverage(scores, t));
    pt.target_coverage = t;
    curve.push_back(pt);
  }
  return curve;
}

RankSumResult rank_sum_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw ConfigError("rank-sum test needs at least two values per side");
  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  const double n = n1 + n2;

  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(a.size() + b.size());
  for (double v : a) pooled.emplace_back(v, 0);
  for (double v : b) pooled.emplace_back(v, 1);
  std::sort(pooled.begin(), pooled.end());

  double rank_sum_a = 0;
  double tie_term = 0;  // sum of t^3 - t over tie groups
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t)
      if (pooled[t].second == 0) rank_sum_a += midrank;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }

  RankSumResult r;
  r.u_statistic = rank_sum_a - n1 * (n1 + 1) / 2.0;
  const double mean = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)));
  if (!(var > 0)) {
    r.p_value = 1.0;
    return r;
  }
  const double dev = std::max(std::abs(r.u_statistic - mean) - 0.5, 0.0);
  r.z = dev / std::sqrt(var);
  r.p_value = std::min(1.0, std::erfc(r.z / std::sqrt(2.0)));
  return r;
}

}  // namespace cclsc
