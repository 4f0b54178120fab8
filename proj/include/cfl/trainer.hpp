#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "cfl/encoder.hpp"

namespace cfl {

/// Raised when a gradient or the model state stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what)
      : std::runtime_error(what) {}
};

struct ModelState {
  Eigen::VectorXd beta;       // current estimate, length d
  double learning_rate = 0.0; // mu of the update step
  int epoch = 0;              // r
};

constexpr int kServerParity = -1;

struct PartialGradient {
  int source = kServerParity;  // device id, or kServerParity
  Eigen::VectorXd vector;      // length d
  int points_covered = 0;
};

/// Sum over the systematic set of x_k^T (x_k beta - y_k). An empty set
/// yields the zero vector.
PartialGradient systematic_gradient(const LocalDataset& data,
                                    const std::vector<int>& systematic_set,
                                    const Eigen::VectorXd& beta);

/// (1/c) X~^T (X~ beta - y~) over the composite parity. c = 0 yields a
/// zero vector with points_covered = 0 (parity absent).
PartialGradient parity_gradient(const CompositeParity& parity,
                                const Eigen::VectorXd& beta);

/// Combine the parity gradient with the received systematic gradients and
/// apply one step: beta -= (mu / m) * grad. Aborts on non-finite input.
ModelState aggregate_and_step(const ModelState& state,
                              const std::vector<PartialGradient>& received,
                              const PartialGradient& parity_grad, int m);

/// ||beta_est - beta_true||^2 / ||beta_true||^2.
double nmse(const Eigen::VectorXd& beta_est, const Eigen::VectorXd& beta_true);

}  // namespace cfl
