#pragma once

// Run persistence: CSV artifacts, run directories and multi-seed comparison.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cclsc/config.hpp"
#include "cclsc/seleval.hpp"
#include "cclsc/trainer.hpp"

namespace cclsc {

// CSV column orders. All files are UTF-8 with '\n' line endings.
inline constexpr const char* kHistoryHeader =
    "epoch,head_loss,csc_loss,csc_anchors,train_accuracy,test_accuracy,var_intra,classifier_norm,bound,empirical_mh";
inline constexpr const char* kCurveHeader =
    "target_coverage,threshold,realized_coverage,selective_risk_percent,selected,errors";
inline constexpr const char* kBoundHeader =
    "epoch,var_intra,classifier_norm,rho_tilde,empirical_mh,bound,train_l0,test_l0,gap";

void write_history_csv(std::ostream& out, const TrainHistory& history);
void write_curve_csv(std::ostream& out, const std::vector<RiskCoveragePoint>& curve);
void write_bound_csv(std::ostream& out, const std::vector<BoundReport>& reports);

std::vector<EpochRecord> read_history_csv(std::istream& in);
std::vector<RiskCoveragePoint> read_curve_csv(std::istream& in);
std::vector<BoundReport> read_bound_csv(std::istream& in);

std::vector<RiskCoveragePoint> load_curve(const std::string& path);

struct RunRecord {
  std::string run_dir;
  std::string config_path;
  std::uint64_t dataset_fingerprint = 0;
  std::string history_csv, curve_csv, bound_csv, checkpoint;
  double wall_seconds = 0;
};

/// Trains, evaluates the coverage grid and writes every artifact into a new
/// directory under cfg.output_dir. Existing run directories are never touched.
RunRecord run_experiment(const ExperimentConfig& cfg);
RunRecord run_experiment(const std::string& config_path);

/// In-memory variant used by run_experiment: train + curve on a built split.
struct ExperimentOutputs {
  TrainResult trained;
  std::vector<RiskCoveragePoint> curve;
};
ExperimentOutputs run_in_memory(const ExperimentConfig& cfg, const Split& data);

/// Resolves auto settings (queue capacity) against the built dataset.
TrainConfig resolve_train_config(const ExperimentConfig& cfg, const Split& data);

struct CoverageComparison {
  double coverage = 0;
  double mean_a = 0, std_a = 0;  // selective risk, fraction
  double mean_b = 0, std_b = 0;
  RankSumResult test;
  std::string verdict;  // "better", "worse" or "tie" for method A
};

/// Compares selective risk of two groups of run directories at each coverage
/// (or only `coverage` when it is positive).
std::vector<CoverageComparison> compare_runs(const std::vector<std::string>& runs_a,
                                             const std::vector<std::string>& runs_b, double coverage = -1,
                                             double alpha = 0.05);

std::vector<CoverageComparison> compare_curves(const std::vector<std::vector<RiskCoveragePoint>>& a,
                                               const std::vector<std::vector<RiskCoveragePoint>>& b,
                                               double coverage = -1, double alpha = 0.05);

void write_comparison(std::ostream& out, const std::vector<CoverageComparison>& rows);

}  // namespace cclsc
