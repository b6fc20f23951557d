#include "mstopo/field_net.hpp"

#include <cmath>
#include <random>

#include "mstopo/errors.hpp"

namespace mstopo {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_inputs(const NetworkParams& params, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != params.input_dim()) {
    throw InvalidArgument("field_net: input width " + std::to_string(inputs.cols()) +
                          " does not match network input_dim " +
                          std::to_string(params.input_dim()));
  }
}

}  // namespace

NetworkGrads zero_like(const NetworkParams& params) {
  NetworkGrads g;
  g.kernels = Eigen::MatrixXd::Zero(params.kernels.rows(), params.kernels.cols());
  g.weights = Eigen::VectorXd::Zero(params.weights.size());
  return g;
}

void accumulate(NetworkGrads& into, const NetworkGrads& g) {
  into.kernels += g.kernels;
  into.weights += g.weights;
}

NetworkParams init_params(int n_kernels, int input_dim, std::uint64_t seed,
                          const InitOptions& options) {
  if (n_kernels < 1 || input_dim < 1) {
    throw InvalidArgument("init_params: n_kernels and input_dim must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  NetworkParams p;
  p.kernels.resize(n_kernels, input_dim);
  p.weights.resize(n_kernels);
  for (int k = 0; k < n_kernels; ++k) {
    for (int d = 0; d < input_dim; ++d) {
      p.kernels(k, d) = options.frequency_scale * unit(rng);
    }
  }
  for (int k = 0; k < n_kernels; ++k) {
    p.weights(k) = options.weight_scale * unit(rng);
  }
  return p;
}

ForwardCache forward_cached(const NetworkParams& params, const Eigen::MatrixXd& inputs) {
  check_inputs(params, inputs);
  ForwardCache cache;
  cache.sin_phase.noalias() = inputs * params.kernels.transpose();
  cache.cos_phase.resize(cache.sin_phase.rows(), cache.sin_phase.cols());
  double* s = cache.sin_phase.data();
  double* c = cache.cos_phase.data();
  const Eigen::Index n = cache.sin_phase.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double phase = s[k] + 1.0;
    ::sincos(phase, &s[k], &c[k]);
  }
  cache.density = (cache.sin_phase * params.weights).unaryExpr(&sigmoid);
  return cache;
}

Eigen::VectorXd forward(const NetworkParams& params, const Eigen::MatrixXd& inputs) {
  check_inputs(params, inputs);
  Eigen::MatrixXd phase = inputs * params.kernels.transpose();
  phase = (phase.array() + 1.0).sin().matrix();
  return (phase * params.weights).unaryExpr(&sigmoid);
}

NetworkGrads backward(const NetworkParams& params, const ForwardCache& cache,
                      const Eigen::MatrixXd& inputs, const Eigen::VectorXd& dL_drho) {
  check_inputs(params, inputs);
  if (dL_drho.size() != inputs.rows() || cache.density.size() != inputs.rows()) {
    throw InvalidArgument("field_net backward: gradient length does not match batch");
  }
  // dL/dz where z is the pre-sigmoid activation.
  const Eigen::VectorXd g =
      (dL_drho.array() * cache.density.array() * (1.0 - cache.density.array())).matrix();

  NetworkGrads out;
  out.weights.noalias() = cache.sin_phase.transpose() * g;
  // dz/dK_kd = W_k cos(phase_rk) X_rd
  const Eigen::MatrixXd scaled = g.asDiagonal() * cache.cos_phase;
  out.kernels.noalias() = scaled.transpose() * inputs;
  out.kernels = params.weights.asDiagonal() * out.kernels;
  return out;
}

NetworkGrads backward(const NetworkParams& params, const Eigen::MatrixXd& inputs,
                      const Eigen::VectorXd& dL_drho) {
  return backward(params, forward_cached(params, inputs), inputs, dL_drho);
}

AdamState AdamState::for_params(const NetworkParams& params, double lr) {
  AdamState s;
  s.first_moment = zero_like(params);
  s.second_moment = zero_like(params);
  s.lr = lr;
  return s;
}

namespace {

template <typename Derived>
void adam_update(Eigen::DenseBase<Derived>& param, Eigen::DenseBase<Derived>& m,
                 Eigen::DenseBase<Derived>& v, const Eigen::DenseBase<Derived>& g,
                 const AdamState& s, double bias1, double bias2) {
  m = s.beta1 * m.derived() + (1.0 - s.beta1) * g.derived();
  v = s.beta2 * v.derived() + (1.0 - s.beta2) * g.derived().cwiseAbs2();
  param.derived().array() -=
      s.lr * (m.derived().array() / bias1) /
      ((v.derived().array() / bias2).sqrt() + s.epsilon);
}

}  // namespace

void adam_step(AdamState& state, NetworkParams& params, const NetworkGrads& grads) {
  if (grads.kernels.rows() != params.kernels.rows() ||
      grads.kernels.cols() != params.kernels.cols() ||
      grads.weights.size() != params.weights.size() ||
      state.first_moment.kernels.rows() != params.kernels.rows() ||
      state.first_moment.kernels.cols() != params.kernels.cols()) {
    throw InvalidArgument("adam_step: shape mismatch");
  }
  if (!grads.all_finite()) {
    throw InvalidArgument("adam_step: non-finite gradient");
  }
  ++state.step_count;
  const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  adam_update(params.kernels, state.first_moment.kernels, state.second_moment.kernels,
              grads.kernels, state, bias1, bias2);
  adam_update(params.weights, state.first_moment.weights, state.second_moment.weights,
              grads.weights, state, bias1, bias2);
}

}  // namespace mstopo
