#pragma once

// Coordinate density network rho(X) = sigmoid(W . sin(K X + 1)).
//
// A single hidden layer of sine units: each row of K is one frequency kernel
// applied to the input coordinates, W mixes the sine responses, and the
// sigmoid keeps densities in (0, 1). The micro network takes (x, y, u, w);
// the macro network of the concurrent mode takes (x, y).

#include <Eigen/Dense>

#include <cstdint>

namespace mstopo {

struct NetworkParams {
  Eigen::MatrixXd kernels;  // n_kernels x input_dim
  Eigen::VectorXd weights;  // n_kernels

  Eigen::Index n_kernels() const { return kernels.rows(); }
  Eigen::Index input_dim() const { return kernels.cols(); }
  Eigen::Index parameter_count() const { return kernels.size() + weights.size(); }
  bool all_finite() const { return kernels.allFinite() && weights.allFinite(); }
};

/// Gradients share NetworkParams' layout.
using NetworkGrads = NetworkParams;

NetworkGrads zero_like(const NetworkParams& params);
void accumulate(NetworkGrads& into, const NetworkGrads& g);

struct InitOptions {
  double frequency_scale = 25.0;  // K ~ U(-f, f)
  double weight_scale = 0.1;      // W ~ U(-s, s)
};

NetworkParams init_params(int n_kernels, int input_dim, std::uint64_t seed,
                          const InitOptions& options = {});

/// Intermediate values kept for a backward pass over the same inputs.
struct ForwardCache {
  Eigen::MatrixXd sin_phase;  // rows x n_kernels
  Eigen::MatrixXd cos_phase;
  Eigen::VectorXd density;
};

Eigen::VectorXd forward(const NetworkParams& params, const Eigen::MatrixXd& inputs);
ForwardCache forward_cached(const NetworkParams& params, const Eigen::MatrixXd& inputs);

/// Exact gradients of sum_r dL_drho[r] * rho_r with respect to K and W.
NetworkGrads backward(const NetworkParams& params, const Eigen::MatrixXd& inputs,
                      const Eigen::VectorXd& dL_drho);
NetworkGrads backward(const NetworkParams& params, const ForwardCache& cache,
                      const Eigen::MatrixXd& inputs, const Eigen::VectorXd& dL_drho);

struct AdamState {
  NetworkParams first_moment;
  NetworkParams second_moment;
  long step_count = 0;
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const NetworkParams& params, double lr = 0.002);
};

/// One bias-corrected Adam update. Rejects non-finite gradients.
void adam_step(AdamState& state, NetworkParams& params, const NetworkGrads& grads);

}  // namespace mstopo
