#pragma once

#include <cmath>
#include <functional>

#include "survflow/dynamics.hpp"
#include "survflow/rng.hpp"

namespace testutil {

// Central finite difference of a scalar function.
inline double central_diff(const std::function<double(double)>& f, double x,
                           double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Recursive adaptive Simpson quadrature.
inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a,
                                   double b, double fa, double fm, double fb,
                                   double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double tol = 1e-7, int depth = 24) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth);
}

struct RandomModelOptions {
  int max_basis = 3;
  int covariate_dim = 3;
  bool allow_hierarchies = true;
  double weight_scale = 1.0;  // extra multiplier on the g-net output layer
};

// Fresh nets have zero biases, which pins SELU pre-activations exactly on the
// activation kink at grid endpoints (input 0) and makes z = 0 an equilibrium.
// Random test models jitter the biases so derivative checks sample generic
// points.
inline void jitter_biases(survflow::dyn::FlowModel& model, std::uint64_t seed) {
  survflow::rng::Engine rng(survflow::rng::derive(seed, 0xB1A5));
  auto jitter = [&](std::vector<survflow::net::DenseNet>& nets) {
    for (auto& n : nets) {
      for (auto& b : n.biases) {
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] += 0.05 * rng.normal();
      }
    }
  };
  jitter(model.pi);
  jitter(model.sigma);
  jitter(model.g);
}

// Small random flow model exercising the different gating modes.
inline survflow::dyn::FlowModel random_model(std::uint64_t seed,
                                             const RandomModelOptions& opts = {}) {
  using namespace survflow;
  rng::Engine pick(rng::derive(seed, 99));
  dyn::DynamicsConfig cfg;
  cfg.covariate_dim = opts.covariate_dim;
  cfg.basis_count = 1 + static_cast<int>(pick.below(static_cast<std::uint64_t>(opts.max_basis)));
  cfg.pi_width = 3;
  cfg.pi_depth = 1 + static_cast<int>(pick.below(2));
  cfg.sigma_width = 3;
  cfg.sigma_depth = 1;
  cfg.g_width = 4;
  cfg.g_depth = 1 + static_cast<int>(pick.below(2));
  const int mode = opts.allow_hierarchies ? static_cast<int>(pick.below(4)) : 0;
  switch (mode) {
    case 1:
      cfg.mode = dyn::HierarchyMode::SharedGate;
      cfg.gate_time = pick.uniform(0.2, 0.8);
      break;
    case 2:
      cfg.mode = dyn::HierarchyMode::Discrete;
      cfg.levels = 2;
      cfg.breakpoints = {pick.uniform(0.3, 0.7), 1.0};
      break;
    case 3:
      cfg.mode = dyn::HierarchyMode::Continuous;
      cfg.levels = 2;
      cfg.centers = {0.25, 0.75};
      cfg.widths = {pick.uniform(1.0, 6.0), pick.uniform(1.0, 6.0)};
      break;
    default:
      cfg.mode = dyn::HierarchyMode::None;
      break;
  }
  dyn::FlowModel model = dyn::init_model(cfg, seed);
  if (opts.weight_scale != 1.0) {
    for (auto& g : model.g) {
      g.weights.back() *= opts.weight_scale;
    }
  }
  jitter_biases(model, seed + 1);
  return model;
}

// A model whose drift is identically zero (all g-net output layers zeroed).
inline survflow::dyn::FlowModel zero_dynamics_model(int covariate_dim = 2, int basis = 2) {
  using namespace survflow;
  dyn::DynamicsConfig cfg;
  cfg.covariate_dim = covariate_dim;
  cfg.basis_count = basis;
  cfg.pi_width = 3;
  cfg.pi_depth = 1;
  cfg.sigma_width = 3;
  cfg.sigma_depth = 1;
  cfg.g_width = 4;
  cfg.g_depth = 1;
  dyn::FlowModel model = dyn::init_model(cfg, 7);
  for (auto& g : model.g) {
    g.weights.back().setZero();
    g.biases.back().setZero();
  }
  return model;
}

// Constant drift c: single basis, g net reduced to an affine map with zero
// weights and bias c.
inline survflow::dyn::FlowModel constant_drift_model(double c, int covariate_dim = 2) {
  using namespace survflow;
  dyn::DynamicsConfig cfg;
  cfg.covariate_dim = covariate_dim;
  cfg.basis_count = 1;
  cfg.pi_width = 2;
  cfg.pi_depth = 1;
  cfg.sigma_width = 2;
  cfg.sigma_depth = 1;
  cfg.g_width = 0;
  cfg.g_depth = 0;  // affine 1 -> 1
  dyn::FlowModel model = dyn::init_model(cfg, 11);
  model.g[0].weights[0].setZero();
  model.g[0].biases[0][0] = c;
  return model;
}

// Linear drift c*z.
inline survflow::dyn::FlowModel linear_drift_model(double c, int covariate_dim = 2) {
  survflow::dyn::FlowModel model = constant_drift_model(0.0, covariate_dim);
  model.g[0].weights[0](0, 0) = c;
  model.g[0].biases[0][0] = 0.0;
  return model;
}

}  // namespace testutil
