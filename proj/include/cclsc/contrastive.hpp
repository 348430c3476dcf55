#pragma once

// Momentum encoder and the two FIFO sample queues. The positive queue holds
// samples the momentum encoder classified correctly; the negative queue holds
// its mistakes. Each entry keeps the normalized feature and predicted class.

#include <cstdint>
#include <deque>
#include <vector>

#include "cclsc/errors.hpp"
#include "cclsc/nn.hpp"

namespace cclsc {

template <typename Scalar>
struct QueueEntry {
  Vector<Scalar> z;
  Eigen::Index predicted_class = 0;
};

template <typename Scalar>
class SampleQueues {
 public:
  explicit SampleQueues(std::size_t capacity = 300) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("queue capacity must be at least 1");
  }

  void push_positive(QueueEntry<Scalar> entry) {
    push(positives_, std::move(entry));
    ++p_pushed_;
  }
  void push_negative(QueueEntry<Scalar> entry) {
    push(negatives_, std::move(entry));
    ++n_pushed_;
  }

  const std::deque<QueueEntry<Scalar>>& positive_queue() const { return positives_; }
  const std::deque<QueueEntry<Scalar>>& negative_queue() const { return negatives_; }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t p_pushed() const { return p_pushed_; }
  std::uint64_t n_pushed() const { return n_pushed_; }

 private:
  void push(std::deque<QueueEntry<Scalar>>& q, QueueEntry<Scalar> entry) {
    q.push_back(std::move(entry));
    while (q.size() > capacity_) q.pop_front();
  }

  std::size_t capacity_;
  std::deque<QueueEntry<Scalar>> positives_;
  std::deque<QueueEntry<Scalar>> negatives_;
  std::uint64_t p_pushed_ = 0;
  std::uint64_t n_pushed_ = 0;
};

template <typename Scalar>
struct MomentumEncoder {
  Network<Scalar> params;
  Scalar q = Scalar(0.99);
};

template <typename Scalar>
MomentumEncoder<Scalar> momentum_init(const Network<Scalar>& online, Scalar q) {
  if (!(q >= 0 && q < 1)) throw ConfigError("momentum coefficient must lie in [0, 1)");
  return {online, q};
}

/// theta_m <- q theta_m + (1 - q) theta
template <typename Scalar>
void momentum_update(MomentumEncoder<Scalar>& enc, const Network<Scalar>& online) {
  if (!enc.params.same_shape(online)) throw ConfigError("momentum encoder shape mismatch");
  const Scalar q = enc.q;
  auto blend = [q](AffineLayer<Scalar>& m, const AffineLayer<Scalar>& o) {
    m.weight = q * m.weight + (Scalar(1) - q) * o.weight;
    m.bias = q * m.bias + (Scalar(1) - q) * o.bias;
  };
  for (std::size_t i = 0; i < online.embedding.size(); ++i) blend(enc.params.embedding[i], online.embedding[i]);
  blend(enc.params.classifier, online.classifier);
}

/// Runs the momentum encoder on the batch and routes each sample by whether
/// its prediction (over the first `classes` outputs) matches its label.
/// A zero embedding throws unless `skip_degenerate` is set, in which case the
/// sample is not enqueued. Returns the number of skipped samples.
template <typename Scalar>
std::size_t encode_and_route(const MomentumEncoder<Scalar>& enc, SampleQueues<Scalar>& queues,
                             const Matrix<Scalar>& batch, const std::vector<int>& labels,
                             Eigen::Index classes, bool skip_degenerate = false) {
  if (static_cast<Eigen::Index>(labels.size()) != batch.rows())
    throw ConfigError("label count does not match batch rows");
  const auto rec = forward(enc.params, batch);
  const Matrix<Scalar> probs = class_probabilities(rec, classes);
  std::size_t skipped = 0;
  for (Eigen::Index i = 0; i < batch.rows(); ++i) {
    if (skip_degenerate && !(rec.embedding().row(i).norm() > 0)) {
      ++skipped;
      continue;
    }
    QueueEntry<Scalar> entry{normalize_embedding(rec.embedding().row(i).transpose()),
                             argmax(probs.row(i))};
    if (entry.predicted_class == labels[static_cast<std::size_t>(i)])
      queues.push_positive(std::move(entry));
    else
      queues.push_negative(std::move(entry));
  }
  return skipped;
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> select_by_class(const std::deque<QueueEntry<Scalar>>& q, Eigen::Index y) {
  Eigen::Index count = 0, dim = 0;
  for (const auto& e : q) {
    if (e.predicted_class == y) ++count;
    dim = e.z.size();
  }
  Matrix<Scalar> out(count, dim);
  Eigen::Index r = 0;
  for (const auto& e : q)
    if (e.predicted_class == y) out.row(r++) = e.z.transpose();
  return out;
}

}  // namespace detail

/// Features of correctly classified queue entries predicted as y, oldest first.
template <typename Scalar>
Matrix<Scalar> select_positives(const SampleQueues<Scalar>& queues, Eigen::Index y) {
  return detail::select_by_class(queues.positive_queue(), y);
}

/// Features of misclassified queue entries that were predicted as y.
template <typename Scalar>
Matrix<Scalar> select_negatives(const SampleQueues<Scalar>& queues, Eigen::Index y) {
  return detail::select_by_class(queues.negative_queue(), y);
}

template <typename Scalar>
bool queues_ready(const SampleQueues<Scalar>& queues, std::size_t s) {
  return queues.p_pushed() > s && queues.n_pushed() > s;
}

}  // namespace cclsc
