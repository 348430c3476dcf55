#include "cclsc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <tuple>

#include "cclsc/errors.hpp"

namespace cclsc {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (e_s < 0) throw ConfigError("e_s must be non-negative");
  if (!(w >= 0)) throw ConfigError("w must be non-negative");
  if (!(q >= 0 && q < 1)) throw ConfigError("q must lie in [0, 1)");
  if (s < 1) throw ConfigError("s must be at least 1");
  if (!(tau > 0)) throw ConfigError("tau must be positive");
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (!(lr_decay > 0)) throw ConfigError("lr_decay must be positive");
  if (lr_interval < 1) throw ConfigError("lr_interval must be positive");
  if (!(sgd_momentum >= 0 && sgd_momentum < 1)) throw ConfigError("sgd_momentum must lie in [0, 1)");
  if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be non-negative");
  if (!(m_sat > 0 && m_sat < 1)) throw ConfigError("m_sat must lie in (0, 1)");
  if (!(beta_em >= 0)) throw ConfigError("beta_em must be non-negative");
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be positive");
  for (auto h : hidden)
    if (h < 1) throw ConfigError("hidden sizes must be positive");
  bound.margin.validate();
  if (!(bound.delta > 0 && bound.delta < 1)) throw ConfigError("bound delta must lie in (0, 1)");
}

std::size_t default_queue_capacity(int num_classes) {
  if (num_classes <= 10) return 300;
  if (num_classes <= 100) return 3000;
  return 10000;
}

double lr_at(const TrainConfig& cfg, int epoch) {
  return cfg.lr * std::pow(cfg.lr_decay, epoch / cfg.lr_interval);
}

// ---------------------------------------------------------------------------

BatchCsc anchor_batch_csc(const ForwardRecord<double>& rec, const std::vector<int>& labels,
                          const SampleQueues<double>& queues, double tau, int num_classes) {
  const MatrixXd& emb = rec.embedding();
  const MatrixXd probs = class_probabilities(rec, num_classes);
  BatchCsc out;
  out.grad_embedding = MatrixXd::Zero(emb.rows(), emb.cols());

  double loss_sum = 0;
  for (Eigen::Index i = 0; i < emb.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    CscContext<double> ctx;
    ctx.positives = select_positives(queues, y);
    if (ctx.positives.rows() == 0) continue;
    if (!(emb.row(i).norm() > 0)) {
      ++out.degenerate_skipped;
      continue;
    }
    ctx.negatives = select_negatives(queues, y);
    ctx.tau = tau;
    ctx.sr = probs.row(i).maxCoeff();
    const VectorXd c = emb.row(i).transpose();
    ctx.anchor_z = normalize_embedding(c);

    loss_sum += csc_loss(ctx);
    const VectorXd gz = csc_grad_anchor(ctx);
    // dz/dc = (I - z z^T) / |c|
    const VectorXd gc = (gz - ctx.anchor_z * ctx.anchor_z.dot(gz)) / c.norm();
    out.grad_embedding.row(i) = gc.transpose();
    ++out.anchors_used;
  }
  if (out.anchors_used > 0) {
    const double n = static_cast<double>(out.anchors_used);
    out.mean_loss = loss_sum / n;
    out.grad_embedding /= n;
  }
  return out;
}

// ---------------------------------------------------------------------------

EpochEvaluation evaluate_epoch(const Network<double>& params, const Dataset& train, const Dataset& test,
                               const BoundSettings& settings, int epoch) {
  const int k = train.num_classes;
  EpochEvaluation ev;
  ev.epoch = epoch;
  ev.sample_count = train.size();
  ev.classifier_norm = classifier_l2_norm(params);

  auto l0_and_accuracy = [&](const MatrixXd& probs, const std::vector<int>& labels) {
    double l0 = 0, correct = 0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      const bool ok = argmax(probs.row(i)) == labels[static_cast<std::size_t>(i)];
      correct += ok ? 1 : 0;
      l0 += selective_loss_l0(ok, probs.row(i).maxCoeff() - settings.h, 0.0, settings.margin.lambda);
    }
    const double n = static_cast<double>(std::max<Eigen::Index>(probs.rows(), 1));
    return std::pair{l0 / n, correct / n};
  };

  const auto train_rec = forward(params, train.features);
  const MatrixXd train_probs = class_probabilities(train_rec, k);
  ev.var_intra = intra_class_variance<double>(train_rec.embedding(), train.labels, k);
  ev.empirical_mh = empirical_margin_loss<double>(train_probs, train.labels, settings.h, settings.margin);
  std::tie(ev.train_l0, ev.train_accuracy) = l0_and_accuracy(train_probs, train.labels);

  if (test.size() > 0) {
    const auto test_rec = forward(params, test.features);
    std::tie(ev.test_l0, ev.test_accuracy) = l0_and_accuracy(class_probabilities(test_rec, k), test.labels);
  }
  return ev;
}

std::vector<BoundReport> bound_trace(const std::vector<EpochEvaluation>& epochs, const BoundSettings& settings) {
  const double rt = rho_tilde(settings.margin);
  std::vector<BoundReport> out;
  out.reserve(epochs.size());
  for (const auto& ev : epochs) {
    BoundReport r;
    r.epoch = ev.epoch;
    r.inputs.var_intra = ev.var_intra;
    r.inputs.classifier_norm = ev.classifier_norm;
    r.inputs.rho_tilde = rt;
    r.inputs.sample_count = static_cast<double>(ev.sample_count);
    r.inputs.delta = settings.delta;
    r.inputs.empirical_margin_loss = ev.empirical_mh;
    r.bound_value = theorem1_bound(r.inputs);
    r.train_l0 = ev.train_l0;
    r.test_l0 = ev.test_l0;
    r.gap = ev.test_l0 - ev.train_l0;
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void diverged(int epoch, int step, const std::string& what) {
  throw TrainingDivergenceError(what + " at epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.size() == 0) throw InputError("training set is empty");
  if (test_set.size() > 0 && test_set.dim() != train_set.dim())
    throw ConfigError("train and test feature dimensions differ");
  const int k = train_set.num_classes;
  if (k < 2) throw ConfigError("training needs at least two classes");
  const bool sat = cfg.head == Head::sat_em;
  const Eigen::Index outputs = k + (sat ? 1 : 0);
  const Eigen::Index n = train_set.size();

  TrainResult result;
  Network<double>& net = result.params;
  net = make_network<double>(train_set.dim(), cfg.hidden, cfg.embedding_dim, outputs, cfg.seed);
  auto opt = make_optimizer(net, cfg.lr, cfg.sgd_momentum, cfg.weight_decay);

  const bool contrastive = cfg.contrastive_enabled();
  std::optional<MomentumEncoder<double>> encoder;
  SampleQueues<double> queues(cfg.s);

  MatrixXd sat_targets;
  if (sat) {
    sat_targets = MatrixXd::Zero(n, outputs);
    for (Eigen::Index i = 0; i < n; ++i) sat_targets(i, train_set.labels[static_cast<std::size_t>(i)]) = 1.0;
  }

  std::mt19937_64 shuffle_rng(cfg.seed ^ 0xa5a5a5a55a5a5a5aULL);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::vector<EpochEvaluation> evaluations;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.learning_rate = lr_at(cfg, epoch);
    if (contrastive && epoch == cfg.e_s) encoder = momentum_init(net, cfg.q);
    const bool csc_phase = contrastive && epoch >= cfg.e_s;
    const bool sat_phase = sat && epoch >= cfg.sat_start();

    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double head_loss_sum = 0, csc_loss_sum = 0;
    int csc_batches = 0;
    std::uint64_t anchors = 0;
    int step = 0;
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size, ++step) {
      const Eigen::Index stop = std::min<Eigen::Index>(start + cfg.batch_size, n);
      const Eigen::Index bn = stop - start;
      MatrixXd x(bn, train_set.dim());
      std::vector<int> y(static_cast<std::size_t>(bn));
      for (Eigen::Index r = 0; r < bn; ++r) {
        const Eigen::Index src = order[static_cast<std::size_t>(start + r)];
        x.row(r) = train_set.features.row(src);
        y[static_cast<std::size_t>(r)] = train_set.labels[static_cast<std::size_t>(src)];
      }

      const auto rec = forward(net, x);

      MatrixXd grad_logits(bn, outputs);
      for (Eigen::Index r = 0; r < bn; ++r) {
        const VectorXd p = rec.probs.row(r).transpose();
        const int label = y[static_cast<std::size_t>(r)];
        LossAndGrad<double> lg;
        if (sat_phase) {
          const Eigen::Index src = order[static_cast<std::size_t>(start + r)];
          sat_targets.row(src) = sat_target_update<double>(sat_targets.row(src).transpose(), p, cfg.m_sat).transpose();
          lg = sat_em_loss<double>(p, sat_targets(src, label), label, cfg.beta_em);
        } else {
          lg = cross_entropy<double>(p, label);
        }
        if (!std::isfinite(lg.loss)) diverged(epoch, step, "non-finite head loss");
        head_loss_sum += lg.loss;
        grad_logits.row(r) = lg.grad_logits.transpose() / static_cast<double>(bn);
      }

      MatrixXd grad_embedding = MatrixXd::Zero(bn, rec.embedding().cols());
      StepInfo info;
      info.epoch = epoch;
      info.step = step;
      info.momentum_initialized = encoder.has_value();
      if (csc_phase) {
        info.queues_ready = queues_ready(queues, cfg.s);
        if (info.queues_ready) {
          const auto csc = anchor_batch_csc(rec, y, queues, cfg.tau, k);
          result.history.degenerate_skipped += csc.degenerate_skipped;
          if (!std::isfinite(csc.mean_loss)) diverged(epoch, step, "non-finite CSC loss");
          if (csc.anchors_used == 0) {
            ++result.history.csc_empty_batches;
          } else {
            grad_embedding = cfg.w * csc.grad_embedding;
            csc_loss_sum += csc.mean_loss;
            ++csc_batches;
            anchors += csc.anchors_used;
            info.csc_applied = true;
          }
        }
        result.history.degenerate_skipped += encode_and_route(*encoder, queues, x, y, k, true);
        momentum_update(*encoder, net);
      }

      const auto grads = backward(net, rec, grad_logits, grad_embedding);
      try {
        sgd_step(net, opt, grads);
      } catch (const TrainingDivergenceError& e) {
        diverged(epoch, step, e.what());
      }

      if (hooks.on_step) {
        info.p_pushed = queues.p_pushed();
        info.n_pushed = queues.n_pushed();
        if (sat) {
          info.sat_target_min = sat_targets.minCoeff();
          info.sat_target_max = sat_targets.maxCoeff();
        }
        hooks.on_step(info);
      }
    }

    const auto ev = evaluate_epoch(net, train_set, test_set, cfg.bound, epoch);
    evaluations.push_back(ev);
    const auto report = bound_trace({ev}, cfg.bound).front();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.head_loss = head_loss_sum / static_cast<double>(n);
    rec.csc_loss = csc_batches > 0 ? csc_loss_sum / csc_batches : 0.0;
    rec.csc_anchors = anchors;
    rec.train_accuracy = ev.train_accuracy;
    rec.test_accuracy = ev.test_accuracy;
    rec.var_intra = ev.var_intra;
    rec.classifier_norm = ev.classifier_norm;
    rec.bound = report.bound_value;
    rec.empirical_mh = ev.empirical_mh;
    result.history.epochs.push_back(rec);
  }
  result.history.bounds = bound_trace(evaluations, cfg.bound);
  result.history.p_pushed = queues.p_pushed();
  result.history.n_pushed = queues.n_pushed();
  return result;
}

}  // namespace cclsc
