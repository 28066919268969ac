#include "survflow/flow.hpp"

#include <cmath>

#include "survflow/errors.hpp"

namespace survflow::flow {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::VectorXd rk4_time_grid(double t0, double t1, int steps) {
  const double h = (t1 - t0) / steps;
  VectorXd times(2 * steps + 1);
  for (int k = 0; k <= 2 * steps; ++k) times[k] = t0 + 0.5 * h * k;
  return times;
}

void rk4_flow(const FlowModel& model, const dyn::CovariateGates& gates,
              const dyn::TimeGateTable& table, double t0, double t1, int steps,
              bool with_divergence, VectorXd& z, VectorXd& a, AugTrace* trace) {
  const Eigen::Index B = z.size();
  const double h = (t1 - t0) / steps;
  if (trace) {
    trace->t0 = t0;
    trace->h = h;
    trace->steps = steps;
    trace->stage_z.assign(static_cast<std::size_t>(steps) * 4, VectorXd());
  }
  VectorXd k1z(B), k2z(B), k3z(B), k4z(B);
  VectorXd k1a(B), k2a(B), k3a(B), k4a(B);
  VectorXd zs(B);
  VectorXd* div1 = with_divergence ? &k1a : nullptr;
  VectorXd* div2 = with_divergence ? &k2a : nullptr;
  VectorXd* div3 = with_divergence ? &k3a : nullptr;
  VectorXd* div4 = with_divergence ? &k4a : nullptr;

  auto stage = [&](int time_idx, const VectorXd& zin, VectorXd& kz, VectorXd* ka) {
    const double t = table.times[time_idx];
    dyn::eval_field_batch(model, gates, dyn::pi_active(model.cfg, t), zin,
                          table.sigma.col(time_idx), table.env.col(time_idx), kz, ka);
  };

  for (int j = 0; j < steps; ++j) {
    const int base = 2 * j;
    if (trace) trace->stage_z[static_cast<std::size_t>(4 * j)] = z;
    stage(base, z, k1z, div1);
    zs = z + (h / 2) * k1z;
    if (trace) trace->stage_z[static_cast<std::size_t>(4 * j + 1)] = zs;
    stage(base + 1, zs, k2z, div2);
    zs = z + (h / 2) * k2z;
    if (trace) trace->stage_z[static_cast<std::size_t>(4 * j + 2)] = zs;
    stage(base + 1, zs, k3z, div3);
    zs = z + h * k3z;
    if (trace) trace->stage_z[static_cast<std::size_t>(4 * j + 3)] = zs;
    stage(base + 2, zs, k4z, div4);
    z += (h / 6) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
    if (with_divergence) a += (h / 6) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
    if (!z.allFinite()) {
      throw NonFiniteError("flow: state became non-finite during fixed-step integration");
    }
  }
}

namespace {

// Single-record augmented integration through the generic solver.
void integrate_single(const FlowModel& model, const dyn::CovariateGates& gates,
                      double z_in, double t0, double t1, bool with_divergence,
                      const SolverConfig& cfg, double& z_out, double& a_out) {
  if (cfg.method == odeint::Method::FixedRK4) {
    VectorXd z(1), a(1);
    z[0] = z_in;
    a[0] = 0.0;
    const dyn::TimeGateTable table =
        dyn::make_time_gate_table(model, rk4_time_grid(t0, t1, cfg.fixed_steps));
    rk4_flow(model, gates, table, t0, t1, cfg.fixed_steps, with_divergence, z, a);
    z_out = z[0];
    a_out = a[0];
    return;
  }
  const Eigen::Index dim = with_divergence ? 2 : 1;
  odeint::Field field = [&](double t, const VectorXd& y, VectorXd& dy) {
    VectorXd z1(1), drift(1), div(1);
    z1[0] = y[0];
    const VectorXd sigma_col = dyn::sigma_at(model, t);
    const VectorXd env_col = dyn::envelope_at(model, t);
    dyn::eval_field_batch(model, gates, dyn::pi_active(model.cfg, t), z1, sigma_col,
                          env_col, drift, with_divergence ? &div : nullptr);
    dy[0] = drift[0];
    if (with_divergence) dy[1] = div[0];
  };
  odeint::IvpState s0;
  s0.components = VectorXd::Zero(dim);
  s0.components[0] = z_in;
  s0.t = t0;
  const odeint::IvpState s1 = odeint::integrate(field, s0, t0, t1, cfg);
  z_out = s1.components[0];
  a_out = with_divergence ? s1.components[1] : 0.0;
}

dyn::CovariateGates gates_for(const FlowModel& model, const Eigen::MatrixXd& X) {
  if (X.rows() != model.cfg.covariate_dim) {
    throw DimensionError("flow: covariate dimension mismatch");
  }
  return dyn::make_covariate_gates(model, X);
}

MatrixXd tile_covariate(const Eigen::VectorXd& x, Eigen::Index m) {
  MatrixXd X(x.size(), m);
  X.colwise() = x;
  return X;
}

}  // namespace

double push_forward(const FlowModel& model, double z, const Eigen::VectorXd& x,
                    const SolverConfig& cfg) {
  const dyn::CovariateGates gates = gates_for(model, MatrixXd(x));
  double z1 = 0.0, a1 = 0.0;
  integrate_single(model, gates, z, 0.0, 1.0, false, cfg, z1, a1);
  const double t = std::exp(z1);
  if (!std::isfinite(t) || t <= 0.0) {
    throw NonFiniteError("push_forward: event time overflowed");
  }
  return t;
}

double pull_back(const FlowModel& model, double t, const Eigen::VectorXd& x,
                 const SolverConfig& cfg) {
  if (!(t > 0.0)) throw DomainError("pull_back: event time must be > 0");
  const dyn::CovariateGates gates = gates_for(model, MatrixXd(x));
  // The backward pass always carries the divergence accumulator so that
  // pull_back, survival, log_density and hazard share one path bitwise.
  double z0 = 0.0, a0 = 0.0;
  integrate_single(model, gates, std::log(t), 1.0, 0.0, true, cfg, z0, a0);
  return z0;
}

double log_density(const FlowModel& model, double t, const Eigen::VectorXd& x,
                   const SolverConfig& cfg) {
  if (!(t > 0.0)) throw DomainError("log_density: event time must be > 0");
  const dyn::CovariateGates gates = gates_for(model, MatrixXd(x));
  double z0 = 0.0, a0 = 0.0;
  integrate_single(model, gates, std::log(t), 1.0, 0.0, true, cfg, z0, a0);
  return special::log_norm_pdf(z0) + a0 - std::log(t);
}

double survival(const FlowModel& model, double t, const Eigen::VectorXd& x,
                const SolverConfig& cfg) {
  if (!(t > 0.0)) throw DomainError("survival: event time must be > 0");
  return special::norm_survival(pull_back(model, t, x, cfg));
}

double hazard(const FlowModel& model, double t, const Eigen::VectorXd& x,
              const SolverConfig& cfg) {
  if (!(t > 0.0)) throw DomainError("hazard: event time must be > 0");
  const dyn::CovariateGates gates = gates_for(model, MatrixXd(x));
  double z0 = 0.0, a0 = 0.0;
  integrate_single(model, gates, std::log(t), 1.0, 0.0, true, cfg, z0, a0);
  const double s = special::norm_survival(z0);
  if (s < 1e-12) {
    throw DegenerateSurvivalError("hazard: survival mass below 1e-12");
  }
  const double f = std::exp(special::log_norm_pdf(z0) + a0 - std::log(t));
  return f / s;
}

Eigen::VectorXd sample(const FlowModel& model, const Eigen::VectorXd& x, int m,
                       rng::Engine& rng, const SolverConfig& cfg) {
  return sample_batch(model, x, m, rng, cfg);
}

double quantile(const FlowModel& model, const Eigen::VectorXd& x, double u,
                const SolverConfig& cfg) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("quantile: u must lie in (0, 1)");
  return push_forward(model, special::norm_quantile(u), x, cfg);
}

Eigen::VectorXd push_forward_batch(const FlowModel& model, const VectorXd& zs,
                                   const MatrixXd& X, const SolverConfig& cfg) {
  if (zs.size() != X.cols()) {
    throw DimensionError("push_forward_batch: one covariate column per draw required");
  }
  const dyn::CovariateGates gates = gates_for(model, X);
  VectorXd z1(zs.size());
  if (cfg.method == odeint::Method::FixedRK4) {
    VectorXd z = zs;
    VectorXd a = VectorXd::Zero(zs.size());
    const dyn::TimeGateTable table =
        dyn::make_time_gate_table(model, rk4_time_grid(0.0, 1.0, cfg.fixed_steps));
    rk4_flow(model, gates, table, 0.0, 1.0, cfg.fixed_steps, false, z, a);
    z1 = z;
  } else {
    for (Eigen::Index b = 0; b < zs.size(); ++b) {
      const dyn::CovariateGates g1 = gates_for(model, MatrixXd(X.col(b)));
      double zf = 0.0, af = 0.0;
      integrate_single(model, g1, zs[b], 0.0, 1.0, false, cfg, zf, af);
      z1[b] = zf;
    }
  }
  VectorXd t = z1.array().exp();
  if (!t.allFinite()) throw NonFiniteError("push_forward_batch: overflow in exp");
  return t;
}

EvalBatch evaluate_batch_segment(const FlowModel& model, const VectorXd& times,
                                 const MatrixXd& X, double t_top, bool frozen_pi,
                                 const SolverConfig& cfg) {
  const Eigen::Index B = times.size();
  if (X.cols() != B) {
    throw DimensionError("evaluate_batch: one covariate column per time required");
  }
  for (Eigen::Index b = 0; b < B; ++b) {
    if (!(times[b] > 0.0)) throw DomainError("evaluate_batch: times must be > 0");
  }
  const dyn::CovariateGates gates =
      frozen_pi ? dyn::frozen_covariate_gates(B) : gates_for(model, X);

  EvalBatch out;
  out.z0.resize(B);
  out.delta_logp.resize(B);
  const VectorXd w = times.array().log();

  if (cfg.method == odeint::Method::FixedRK4) {
    VectorXd z = w;
    VectorXd a = VectorXd::Zero(B);
    const dyn::TimeGateTable table = dyn::make_time_gate_table(
        model, rk4_time_grid(t_top, 0.0, cfg.fixed_steps));
    rk4_flow(model, gates, table, t_top, 0.0, cfg.fixed_steps, true, z, a);
    out.z0 = z;
    out.delta_logp = a;
  } else {
    for (Eigen::Index b = 0; b < B; ++b) {
      const dyn::CovariateGates g1 =
          frozen_pi ? dyn::frozen_covariate_gates(1) : gates_for(model, MatrixXd(X.col(b)));
      double z0 = 0.0, a0 = 0.0;
      integrate_single(model, g1, w[b], t_top, 0.0, true, cfg, z0, a0);
      out.z0[b] = z0;
      out.delta_logp[b] = a0;
    }
  }

  out.log_density.resize(B);
  out.survival.resize(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    out.log_density[b] = special::log_norm_pdf(out.z0[b]) + out.delta_logp[b] - w[b];
    out.survival[b] = special::norm_survival(out.z0[b]);
  }
  return out;
}

EvalBatch evaluate_batch(const FlowModel& model, const VectorXd& times,
                         const MatrixXd& X, const SolverConfig& cfg) {
  return evaluate_batch_segment(model, times, X, 1.0, false, cfg);
}

Eigen::VectorXd sample_batch(const FlowModel& model, const Eigen::VectorXd& x, int m,
                             rng::Engine& rng, const SolverConfig& cfg) {
  if (m < 1) throw DomainError("sample: m must be >= 1");
  VectorXd zs(m);
  for (int i = 0; i < m; ++i) zs[i] = rng.normal();
  return push_forward_batch(model, zs, tile_covariate(x, m), cfg);
}

}  // namespace survflow::flow
