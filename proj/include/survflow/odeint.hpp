#pragma once

#include <Eigen/Core>
#include <functional>
#include <span>
#include <vector>

#include "survflow/errors.hpp"

namespace survflow::odeint {

enum class Method {
  AdaptiveRK54,  // Tsitouras 5(4) pair
  AdaptiveRK32,  // Bogacki-Shampine 3(2) pair
  FixedRK4,      // classic fourth-order Runge-Kutta
};

struct SolverConfig {
  Method method = Method::AdaptiveRK54;
  double rtol = 1e-4;
  double atol = 1e-6;
  int fixed_steps = 16;    // FixedRK4 only
  int max_steps = 100000;  // accepted + rejected

  static SolverConfig evaluation() { return {}; }
  static SolverConfig training(int steps = 16) {
    SolverConfig cfg;
    cfg.method = Method::FixedRK4;
    cfg.fixed_steps = steps;
    return cfg;
  }
};

void validate(const SolverConfig& cfg);

struct IvpState {
  Eigen::VectorXd components;
  double t = 0.0;
};

/// Vector field: writes d(state)/dt into `deriv` (pre-sized to state's size).
using Field =
    std::function<void(double t, const Eigen::VectorXd& state, Eigen::VectorXd& deriv)>;

/// Integrates state0 from t0 to t1 (either direction). Adaptive methods keep
/// the local error within (rtol, atol); FixedRK4 takes cfg.fixed_steps equal
/// steps. Throws NonFiniteError / StepLimitError.
IvpState integrate(const Field& field, const IvpState& state0, double t0, double t1,
                   const SolverConfig& cfg);

/// Runs `method`'s stage formula with a constant step (no error control),
/// `n_steps` steps from t0 to t1. Exposed for convergence-order probing.
Eigen::VectorXd fixed_step_run(Method method, const Field& field,
                               const Eigen::VectorXd& y0, double t0, double t1,
                               int n_steps);

struct OrderProbe {
  double slope = 0.0;  // least-squares slope of log(error) versus log(h)
  bool degenerate = false;
  std::vector<double> errors;
};

/// Measures the convergence order of `method` against a known solution at t1.
OrderProbe order_probe(Method method, const Field& field, const Eigen::VectorXd& y0,
                       double t0, double t1, const Eigen::VectorXd& exact_t1,
                       std::span<const int> step_counts);

}  // namespace survflow::odeint
