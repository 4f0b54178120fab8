#include "cfl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cfl {

namespace {

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

PartialGradient systematic_gradient(const LocalDataset& data,
                                    const std::vector<int>& systematic_set,
                                    const Eigen::VectorXd& beta) {
  PartialGradient grad;
  grad.source = 0;
  grad.points_covered = static_cast<int>(systematic_set.size());
  const auto d = data.features.cols();
  if (systematic_set.empty()) {
    grad.vector = Eigen::VectorXd::Zero(d);
    return grad;
  }
  if (static_cast<Eigen::Index>(systematic_set.size()) ==
      data.features.rows()) {
    // Full participation; no row gather needed.
    grad.vector = data.features.transpose() *
                  (data.features * beta - data.labels);
    return grad;
  }
  Eigen::MatrixXd rows(systematic_set.size(), d);
  Eigen::VectorXd labels(systematic_set.size());
  for (size_t i = 0; i < systematic_set.size(); ++i) {
    const int k = systematic_set[i];
    if (k < 0 || k >= data.features.rows()) {
      throw std::invalid_argument("systematic index out of range");
    }
    rows.row(static_cast<Eigen::Index>(i)) = data.features.row(k);
    labels(static_cast<Eigen::Index>(i)) = data.labels(k);
  }
  grad.vector = rows.transpose() * (rows * beta - labels);
  return grad;
}

PartialGradient parity_gradient(const CompositeParity& parity,
                                const Eigen::VectorXd& beta) {
  PartialGradient grad;
  grad.source = kServerParity;
  grad.points_covered = static_cast<int>(parity.features.rows());
  if (parity.features.rows() == 0) {
    grad.vector = Eigen::VectorXd::Zero(beta.size());
    grad.points_covered = 0;
    return grad;
  }
  const double c = static_cast<double>(parity.features.rows());
  grad.vector = parity.features.transpose() *
                (parity.features * beta - parity.labels) / c;
  return grad;
}

ModelState aggregate_and_step(const ModelState& state,
                              const std::vector<PartialGradient>& received,
                              const PartialGradient& parity_grad, int m) {
  if (m <= 0) throw std::invalid_argument("m must be positive");
  if (state.learning_rate <= 0.0) {
    throw std::invalid_argument("learning rate must be positive");
  }
  Eigen::VectorXd grad = parity_grad.vector.size() == state.beta.size()
                             ? parity_grad.vector
                             : Eigen::VectorXd::Zero(state.beta.size());
  if (!finite(grad)) {
    throw DivergenceError("non-finite parity gradient at epoch " +
                          std::to_string(state.epoch));
  }
  // Fixed order so aggregation is independent of arrival order.
  std::vector<const PartialGradient*> ordered;
  ordered.reserve(received.size());
  for (const auto& g : received) ordered.push_back(&g);
  std::sort(ordered.begin(), ordered.end(),
            [](const PartialGradient* a, const PartialGradient* b) {
              return a->source < b->source;
            });
  for (size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->source == ordered[i - 1]->source) {
      throw std::invalid_argument("duplicate gradient from device " +
                                  std::to_string(ordered[i]->source));
    }
  }
  for (const auto* g : ordered) {
    if (g->vector.size() != state.beta.size()) {
      throw std::invalid_argument("gradient dimension mismatch");
    }
    if (!finite(g->vector)) {
      throw DivergenceError("non-finite gradient from device " +
                            std::to_string(g->source) + " at epoch " +
                            std::to_string(state.epoch));
    }
    grad += g->vector;
  }

  ModelState next = state;
  next.beta = state.beta - (state.learning_rate / m) * grad;
  next.epoch = state.epoch + 1;
  if (!finite(next.beta)) {
    throw DivergenceError("model state diverged at epoch " +
                          std::to_string(next.epoch));
  }
  return next;
}

double nmse(const Eigen::VectorXd& beta_est,
            const Eigen::VectorXd& beta_true) {
  if (beta_est.size() != beta_true.size()) {
    throw std::invalid_argument("nmse length mismatch");
  }
  const double denom = beta_true.squaredNorm();
  if (denom == 0.0) throw std::invalid_argument("beta_true must be nonzero");
  return (beta_est - beta_true).squaredNorm() / denom;
}

}  // namespace cfl
