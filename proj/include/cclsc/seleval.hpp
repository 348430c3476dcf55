#pragma once

// Selective-classification evaluation: SR scoring, threshold calibration,
// coverage / selective risk and the rank-sum comparison.

#include <cstddef>
#include <vector>

#include "cclsc/nn.hpp"

namespace cclsc {

struct ScoredPrediction {
  double confidence = 0;
  int predicted = 0;
  int truth = 0;
  bool correct() const { return predicted == truth; }
};

using ScoredPredictions = std::vector<ScoredPrediction>;

struct RiskCoveragePoint {
  double target_coverage = 1;
  double threshold = 0;
  double realized_coverage = 1;
  double selective_risk = 0;
  std::size_t selected = 0;
  std::size_t errors = 0;
};

/// Table coverage grid, highest first.
std::vector<double> default_coverage_grid();

ScoredPredictions score_dataset(const Network<double>& params, const MatrixXd& features,
                                const std::vector<int>& labels, int k);

/// Confidences g and labels to scored rows, given class probabilities.
ScoredPredictions score_probabilities(const MatrixXd& class_probs, const std::vector<int>& labels);

/// The smallest threshold among observed scores whose selection rule g >= h
/// covers at least `target` of the samples.
double threshold_for_coverage(const std::vector<double>& scores, double target);

RiskCoveragePoint coverage_and_risk(const ScoredPredictions& preds, double h);

std::vector<RiskCoveragePoint> risk_coverage_curve(const ScoredPredictions& preds,
                                                   const std::vector<double>& targets);

struct RankSumResult {
  double u_statistic = 0;  // U of the first sample
  double z = 0;
  double p_value = 1;      // two-sided
};

/// Mann-Whitney U with midranks, normal approximation with tie and
/// continuity corrections.
RankSumResult rank_sum_test(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace cclsc
