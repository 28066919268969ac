#pragma once

#include <Eigen/Core>
#include <vector>

#include "survflow/dynamics.hpp"
#include "survflow/odeint.hpp"
#include "survflow/rng.hpp"
#include "survflow/special.hpp"

namespace survflow::flow {

using dyn::FlowModel;
using odeint::SolverConfig;

/// The fixed latent distribution (standard normal).
struct LatentSpec {
  double log_pdf(double z) const { return special::log_norm_pdf(z); }
  double survival(double z) const { return special::norm_survival(z); }
  double log_survival(double z) const { return special::log_norm_survival(z); }
  double quantile(double u) const { return special::norm_quantile(u); }
};

/// Augmented path state: latent value and accumulated log-density change.
struct FlowState {
  double z = 0.0;
  double delta_logp = 0.0;
};

/// Stage-time grid of a fixed RK4 run: 2*steps + 1 points from t0 to t1.
Eigen::VectorXd rk4_time_grid(double t0, double t1, int steps);

/// Stage states recorded by the batched fixed-RK4 pass, for reverse sweeps.
struct AugTrace {
  double t0 = 0.0;
  double h = 0.0;
  int steps = 0;
  // stage_z[4*j + m] is the state entering stage m of step j (size B each).
  std::vector<Eigen::VectorXd> stage_z;
};

/// Batched fixed-step RK4 on the augmented system d(z, a)/dt =
/// (drift, divergence). Gating tables must cover rk4_time_grid(t0, t1, steps).
void rk4_flow(const FlowModel& model, const dyn::CovariateGates& gates,
              const dyn::TimeGateTable& table, double t0, double t1, int steps,
              bool with_divergence, Eigen::VectorXd& z, Eigen::VectorXd& a,
              AugTrace* trace = nullptr);

/// T = exp(G(z, x)): integrate the drift from 0 to 1 and exponentiate.
double push_forward(const FlowModel& model, double z, const Eigen::VectorXd& x,
                    const SolverConfig& cfg = SolverConfig::evaluation());

/// Inverse map: latent value whose push-forward is t. Requires t > 0.
double pull_back(const FlowModel& model, double t, const Eigen::VectorXd& x,
                 const SolverConfig& cfg = SolverConfig::evaluation());

double log_density(const FlowModel& model, double t, const Eigen::VectorXd& x,
                   const SolverConfig& cfg = SolverConfig::evaluation());

double survival(const FlowModel& model, double t, const Eigen::VectorXd& x,
                const SolverConfig& cfg = SolverConfig::evaluation());

double hazard(const FlowModel& model, double t, const Eigen::VectorXd& x,
              const SolverConfig& cfg = SolverConfig::evaluation());

/// m event-time draws at covariates x; reproducible from the engine state.
Eigen::VectorXd sample(const FlowModel& model, const Eigen::VectorXd& x, int m,
                       rng::Engine& rng,
                       const SolverConfig& cfg = SolverConfig::evaluation());

/// push_forward(Phi^{-1}(u), x); u strictly inside (0, 1).
double quantile(const FlowModel& model, const Eigen::VectorXd& x, double u,
                const SolverConfig& cfg = SolverConfig::evaluation());

/// Batched forward map; column b of X conditions draw zs[b].
Eigen::VectorXd push_forward_batch(const FlowModel& model, const Eigen::VectorXd& zs,
                                   const Eigen::MatrixXd& X,
                                   const SolverConfig& cfg = SolverConfig::evaluation());

/// One backward pass per record: latent preimages plus density and survival.
struct EvalBatch {
  Eigen::VectorXd z0;           // G^{-1}(log t)
  Eigen::VectorXd delta_logp;   // accumulated divergence integral (backward sign)
  Eigen::VectorXd log_density;  // log f_T(t | x)
  Eigen::VectorXd survival;     // S_T(t | x)
};
EvalBatch evaluate_batch(const FlowModel& model, const Eigen::VectorXd& times,
                         const Eigen::MatrixXd& X,
                         const SolverConfig& cfg = SolverConfig::evaluation());

/// Same backward pass but for the sub-flow on [0, t_top]; frozen_pi replaces
/// every covariate gate by 1 (the unconditional representation).
EvalBatch evaluate_batch_segment(const FlowModel& model, const Eigen::VectorXd& times,
                                 const Eigen::MatrixXd& X, double t_top, bool frozen_pi,
                                 const SolverConfig& cfg = SolverConfig::evaluation());

/// Convenience: m draws with a single covariate vector.
Eigen::VectorXd sample_batch(const FlowModel& model, const Eigen::VectorXd& x, int m,
                             rng::Engine& rng,
                             const SolverConfig& cfg = SolverConfig::evaluation());

}  // namespace survflow::flow
