#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cclsc/contrastive.hpp"
#include "cclsc/dataset.hpp"
#include "cclsc/losses.hpp"
#include "cclsc/nn.hpp"
#include "cclsc/theory.hpp"

namespace cclsc {

enum class Method { ccl_sc, ce_baseline };
enum class Head { cross_entropy, sat_em };

/// Margin parameters and thresholds used when tracing the bound.
struct BoundSettings {
  MarginParams<double> margin;
  double delta = 0.05;
  double h = 0.0;  // shifted-confidence threshold; lambda of L0 is margin.lambda
};

struct TrainConfig {
  Method method = Method::ccl_sc;
  std::vector<Eigen::Index> hidden{64};
  Eigen::Index embedding_dim = 32;

  int epochs = 60;
  int batch_size = 64;
  int e_s = 20;
  double w = 0.5;
  double q = 0.99;
  std::size_t s = 300;
  double tau = kDefaultTau;

  double lr = 0.1;
  double lr_decay = 0.5;
  int lr_interval = 25;
  double sgd_momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 1;

  Head head = Head::cross_entropy;
  double m_sat = 0.9;
  double beta_em = 0.001;
  int e_s_sat = -1;  // negative: same as e_s

  BoundSettings bound;

  void validate() const;
  int sat_start() const { return e_s_sat < 0 ? e_s : e_s_sat; }
  /// Whether the contrastive term can ever be active under this config.
  bool contrastive_enabled() const { return method == Method::ccl_sc && w > 0 && e_s < epochs; }
};

/// Queue capacity matching the class count: 300 up to 10 classes, 3000 up to
/// 100, 10000 above.
std::size_t default_queue_capacity(int num_classes);

double lr_at(const TrainConfig& cfg, int epoch);

struct EpochRecord {
  int epoch = 0;
  double head_loss = 0;
  double csc_loss = 0;
  std::uint64_t csc_anchors = 0;
  double train_accuracy = 0;
  double test_accuracy = 0;
  double var_intra = 0;
  double classifier_norm = 0;
  double bound = 0;
  double empirical_mh = 0;
};

/// Per-epoch quantities feeding the bound trace.
struct EpochEvaluation {
  int epoch = 0;
  double var_intra = 0;
  double classifier_norm = 0;
  double empirical_mh = 0;
  double train_l0 = 0;
  double test_l0 = 0;
  double train_accuracy = 0;
  double test_accuracy = 0;
  Eigen::Index sample_count = 0;
};

struct BoundReport {
  int epoch = 0;
  BoundInputs<double> inputs;
  double bound_value = 0;
  double train_l0 = 0;
  double test_l0 = 0;
  double gap = 0;
};

EpochEvaluation evaluate_epoch(const Network<double>& params, const Dataset& train, const Dataset& test,
                               const BoundSettings& settings, int epoch);

std::vector<BoundReport> bound_trace(const std::vector<EpochEvaluation>& epochs, const BoundSettings& settings);

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<BoundReport> bounds;
  std::uint64_t csc_empty_batches = 0;  // batches where no anchor had a positive
  std::uint64_t degenerate_skipped = 0; // zero-norm embeddings left out of CSC and the queues
  std::uint64_t p_pushed = 0;
  std::uint64_t n_pushed = 0;
};

struct TrainResult {
  Network<double> params;
  TrainHistory history;
};

struct StepInfo {
  int epoch = 0;
  int step = 0;
  bool momentum_initialized = false;
  bool queues_ready = false;
  bool csc_applied = false;
  std::uint64_t p_pushed = 0;
  std::uint64_t n_pushed = 0;
  double sat_target_min = 0;
  double sat_target_max = 1;
};

struct TrainHooks {
  std::function<void(const StepInfo&)> on_step;
};

TrainResult train(const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

struct BatchCsc {
  double mean_loss = 0;
  MatrixXd grad_embedding;  // d(mean loss)/d c(x), n x e
  std::size_t anchors_used = 0;
  std::size_t degenerate_skipped = 0;
};

/// Mean CSC loss over anchors that have at least one positive, and its
/// gradient with respect to the unnormalized embeddings c(x). Anchors whose
/// embedding is exactly zero are skipped and counted.
BatchCsc anchor_batch_csc(const ForwardRecord<double>& rec, const std::vector<int>& labels,
                          const SampleQueues<double>& queues, double tau, int num_classes);

}  // namespace cclsc
