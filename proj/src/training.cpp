#include "survflow/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "survflow/errors.hpp"

namespace survflow::train {

using dyn::FlowModel;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw DomainError("TrainConfig: learning_rate <= 0");
  if (cfg.batch_size < 1) throw DomainError("TrainConfig: batch_size < 1");
  if (cfg.max_epochs < 1) throw DomainError("TrainConfig: max_epochs < 1");
  if (cfg.patience < 1) throw DomainError("TrainConfig: patience < 1");
  if (cfg.hierarchy_weight < 0.0) throw DomainError("TrainConfig: hierarchy_weight < 0");
  if (cfg.fixed_steps < 1) throw DomainError("TrainConfig: fixed_steps < 1");
}

BatchView batch_view(std::span<const ObservedRecord> batch, int covariate_dim) {
  BatchView view;
  const auto B = static_cast<Eigen::Index>(batch.size());
  view.X.resize(covariate_dim, B);
  view.times.resize(B);
  view.events.resize(batch.size());
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& r = batch[static_cast<std::size_t>(b)];
    if (!(r.time > 0.0)) throw DomainError("batch: observation time must be > 0");
    if (r.x.size() != covariate_dim) {
      throw DimensionError("batch: covariate dimension mismatch");
    }
    view.X.col(b) = r.x;
    view.times[b] = r.time;
    view.events[static_cast<std::size_t>(b)] = r.event;
  }
  return view;
}

namespace {

// Per-record loss terms from the backward-integration endpoint.
double record_loss(double z0, double a0, double logt, int event, Eigen::Index index) {
  double l;
  if (event) {
    l = 0.5 * z0 * z0 + special::kLogSqrt2Pi - a0 + logt;
  } else {
    l = -special::log_norm_survival(z0);
  }
  if (!std::isfinite(l)) {
    throw NonFiniteError("censored_nll: non-finite loss at record " +
                         std::to_string(index));
  }
  return l;
}

double nll_from_eval(const flow::EvalBatch& ev, const BatchView& view) {
  const Eigen::Index B = ev.z0.size();
  double acc = 0.0;
  for (Eigen::Index b = 0; b < B; ++b) {
    acc += record_loss(ev.z0[b], ev.delta_logp[b], std::log(view.times[b]),
                       view.events[static_cast<std::size_t>(b)], b);
  }
  return acc / static_cast<double>(B);
}

// Gradient accumulator mirroring the model parameters.
struct GradAccum {
  std::vector<net::NetGrad> pi;
  std::vector<net::NetGrad> sigma;
  std::vector<net::NetGrad> g;
  VectorXd centers;
  VectorXd log_widths;

  explicit GradAccum(const FlowModel& model) {
    for (const auto& n : model.pi) pi.emplace_back(n);
    for (const auto& n : model.sigma) sigma.emplace_back(n);
    for (const auto& n : model.g) g.emplace_back(n);
    if (model.cfg.mode == dyn::HierarchyMode::Continuous) {
      centers = VectorXd::Zero(model.cfg.levels);
      log_widths = VectorXd::Zero(model.cfg.levels);
    }
  }

  net::ParamVector pack(const FlowModel& model) const {
    net::ParamVector pv;
    pv.layout = dyn::model_layout(model.cfg);
    pv.values.resize(pv.layout.total());
    Eigen::Index k = 0;
    for (const auto& gr : pi) k += net::pack_grad(gr, pv.values.segment(k, pv.values.size() - k));
    for (const auto& gr : sigma) k += net::pack_grad(gr, pv.values.segment(k, pv.values.size() - k));
    for (const auto& gr : g) k += net::pack_grad(gr, pv.values.segment(k, pv.values.size() - k));
    if (model.cfg.mode == dyn::HierarchyMode::Continuous) {
      pv.values.segment(k, centers.size()) = centers;
      k += centers.size();
      pv.values.segment(k, log_widths.size()) = log_widths;
      k += log_widths.size();
    }
    if (k != pv.values.size()) throw DimensionError("GradAccum: layout mismatch");
    return pv;
  }
};

// One loss sweep (forward fixed-RK4 + reverse accumulation). `weight` scales
// this sweep's contribution to the total loss. Returns the unweighted mean
// censored NLL of the (sub-)flow.
double sweep(const FlowModel& model, const BatchView& view, double t_top,
             bool frozen_pi, int steps, double weight, GradAccum& acc) {
  const auto& cfg = model.cfg;
  const Eigen::Index B = view.times.size();
  const Eigen::Index KH = static_cast<Eigen::Index>(cfg.basis_count) * cfg.levels;

  const dyn::CovariateGates gates = frozen_pi
                                        ? dyn::frozen_covariate_gates(B)
                                        : dyn::make_covariate_gates(model, view.X);
  const VectorXd grid = flow::rk4_time_grid(t_top, 0.0, steps);
  const dyn::TimeGateTable table = dyn::make_time_gate_table(model, grid);
  const Eigen::Index T = grid.size();

  // Forward pass, recording stage states.
  VectorXd logt = view.times.array().log();
  VectorXd z = logt;
  VectorXd a = VectorXd::Zero(B);
  flow::AugTrace trace;
  flow::rk4_flow(model, gates, table, t_top, 0.0, steps, true, z, a, &trace);

  double loss = 0.0;
  VectorXd zbar(B), abar(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const int ev = view.events[static_cast<std::size_t>(b)];
    loss += record_loss(z[b], a[b], logt[b], ev, b);
    const double scale = weight / static_cast<double>(B);
    if (ev) {
      zbar[b] = scale * z[b];
      abar[b] = -scale;
    } else {
      zbar[b] = scale * special::norm_hazard(z[b]);
      abar[b] = 0.0;
    }
  }
  loss /= static_cast<double>(B);

  // Cotangent tables for the time gates and hierarchy envelopes.
  MatrixXd pibar = MatrixXd::Zero(KH, B);
  MatrixXd sigcot = MatrixXd::Zero(KH, T);
  MatrixXd envcot = MatrixXd::Zero(cfg.levels, T);
  bool pi_used = false;

  MatrixXd gv, gd, xbar;
  MatrixXd ybar(1, B), ydotbar(1, B);
  const MatrixXd ones = MatrixXd::Ones(1, B);
  net::ForwardTrace ntrace;

  // VJP of one field evaluation: cotangents (cz, ca) on (drift, divergence)
  // at stage state zin and table column tidx; adds the z cotangent into zacc.
  auto stage_vjp = [&](int tidx, const VectorXd& zin, const VectorXd& cz,
                       const VectorXd& ca, VectorXd& zacc) {
    const double t = table.times[tidx];
    const bool use_pi = dyn::pi_active(cfg, t) && !gates.frozen;
    pi_used = pi_used || use_pi;
    const MatrixXd zrow = zin.transpose();
    for (int h = 0; h < cfg.levels; ++h) {
      const double env = table.env(h, tidx);
      if (env == 0.0) continue;  // inactive discrete level: no parameters behind it
      for (int i = 0; i < cfg.basis_count; ++i) {
        const Eigen::Index kh = static_cast<Eigen::Index>(h) * cfg.basis_count + i;
        const double se = env * table.sigma(kh, tidx);
        net::forward_tangent(model.g_net(h, i), zrow, ones, gv, gd, &ntrace);
        // Effective weights w_r and their cotangents wbar_r.
        Eigen::ArrayXd w(B);
        if (use_pi) {
          w = se * gates.pifac.row(kh).transpose().array();
        } else {
          w.setConstant(se);
        }
        ybar.row(0) = (cz.array() * w).matrix().transpose();
        ydotbar.row(0) = (ca.array() * w).matrix().transpose();
        net::vjp_tangent(model.g_net(h, i), ntrace, ybar, ydotbar,
                         acc.g[static_cast<std::size_t>(kh)], &xbar);
        zacc += xbar.row(0).transpose();

        const Eigen::ArrayXd wbar = cz.array() * gv.row(0).transpose().array() +
                                    ca.array() * gd.row(0).transpose().array();
        double m;  // sum_r wbar_r * pifac_r
        if (use_pi) {
          pibar.row(kh) += (se * wbar).matrix().transpose();
          m = (wbar * gates.pifac.row(kh).transpose().array()).sum();
        } else {
          m = wbar.sum();
        }
        sigcot(kh, tidx) += m * env;
        envcot(h, tidx) += m * table.sigma(kh, tidx);
      }
    }
  };

  // Reverse sweep over the recorded RK4 steps.
  const double h = trace.h;
  VectorXd b4(B), b3(B), b2(B), b1(B);
  VectorXd in4(B), in3(B), in2(B), in1(B);
  for (int j = steps - 1; j >= 0; --j) {
    const int base = 2 * j;
    const auto sz = [&](int m) -> const VectorXd& {
      return trace.stage_z[static_cast<std::size_t>(4 * j + m)];
    };
    in4.setZero();
    b4 = (h / 6) * zbar;
    stage_vjp(base + 2, sz(3), b4, (h / 6) * abar, in4);

    in3.setZero();
    b3 = (h / 3) * zbar + h * in4;
    stage_vjp(base + 1, sz(2), b3, (h / 3) * abar, in3);

    in2.setZero();
    b2 = (h / 3) * zbar + (h / 2) * in3;
    stage_vjp(base + 1, sz(1), b2, (h / 3) * abar, in2);

    in1.setZero();
    b1 = (h / 6) * zbar + (h / 2) * in2;
    stage_vjp(base, sz(0), b1, (h / 6) * abar, in1);

    zbar += in1 + in2 + in3 + in4;
  }

  // Covariate gate networks.
  if (pi_used) {
    for (int lvl = 0; lvl < cfg.levels; ++lvl) {
      net::ForwardTrace ptrace;
      MatrixXd py;
      net::forward(model.pi[static_cast<std::size_t>(lvl)], view.X, py, &ptrace);
      net::vjp(model.pi[static_cast<std::size_t>(lvl)], ptrace,
               pibar.middleRows(static_cast<Eigen::Index>(lvl) * cfg.basis_count,
                                cfg.basis_count),
               acc.pi[static_cast<std::size_t>(lvl)], nullptr);
    }
  }

  // Time gate networks over the stage-time grid.
  {
    MatrixXd trow(1, T);
    trow.row(0) = table.times.transpose();
    for (int lvl = 0; lvl < cfg.levels; ++lvl) {
      net::ForwardTrace strace;
      MatrixXd sy;
      net::forward(model.sigma[static_cast<std::size_t>(lvl)], trow, sy, &strace);
      net::vjp(model.sigma[static_cast<std::size_t>(lvl)], strace,
               sigcot.middleRows(static_cast<Eigen::Index>(lvl) * cfg.basis_count,
                                 cfg.basis_count),
               acc.sigma[static_cast<std::size_t>(lvl)], nullptr);
    }
  }

  // Learnable envelope centers and widths.
  if (cfg.mode == dyn::HierarchyMode::Continuous) {
    for (int lvl = 0; lvl < cfg.levels; ++lvl) {
      const double c = std::exp(model.log_widths[lvl]);
      for (Eigen::Index tj = 0; tj < T; ++tj) {
        const double cot = envcot(lvl, tj);
        if (cot == 0.0) continue;
        const double dt = table.times[tj] - model.centers[lvl];
        const double env = table.env(lvl, tj);
        acc.centers[lvl] += cot * env * 2.0 * c * dt;
        acc.log_widths[lvl] += cot * env * (-c * dt * dt);
      }
    }
  }

  return loss;
}

}  // namespace

double censored_nll(const FlowModel& model, std::span<const ObservedRecord> batch,
                    const odeint::SolverConfig& cfg) {
  if (batch.empty()) throw DomainError("censored_nll: empty batch");
  const BatchView view = batch_view(batch, model.cfg.covariate_dim);
  const flow::EvalBatch ev = flow::evaluate_batch(model, view.times, view.X, cfg);
  return nll_from_eval(ev, view);
}

double hierarchical_loss(const FlowModel& model, std::span<const ObservedRecord> batch,
                         const odeint::SolverConfig& cfg) {
  if (batch.empty()) throw DomainError("hierarchical_loss: empty batch");
  if (model.cfg.mode != dyn::HierarchyMode::SharedGate) {
    throw ModeError("hierarchical_loss: shared-gate mode required");
  }
  const BatchView view = batch_view(batch, model.cfg.covariate_dim);
  const flow::EvalBatch unc = flow::evaluate_batch_segment(
      model, view.times, view.X, model.cfg.gate_time, true, cfg);
  const flow::EvalBatch cond = flow::evaluate_batch(model, view.times, view.X, cfg);
  return nll_from_eval(unc, view) +
         model.cfg.hierarchy_weight * nll_from_eval(cond, view);
}

LossGradient gradient(const FlowModel& model, std::span<const ObservedRecord> batch,
                      LossKind kind, int fixed_steps) {
  if (batch.empty()) throw DomainError("gradient: empty batch");
  if (fixed_steps < 1) throw DomainError("gradient: fixed_steps < 1");
  if (kind == LossKind::Hierarchical &&
      model.cfg.mode != dyn::HierarchyMode::SharedGate) {
    throw ModeError("gradient: hierarchical loss requires shared-gate mode");
  }
  const BatchView view = batch_view(batch, model.cfg.covariate_dim);
  GradAccum acc(model);
  LossGradient out;
  if (kind == LossKind::Censored) {
    out.loss = sweep(model, view, 1.0, false, fixed_steps, 1.0, acc);
  } else {
    const double lambda = model.cfg.hierarchy_weight;
    out.loss = sweep(model, view, model.cfg.gate_time, true, fixed_steps, 1.0, acc);
    out.loss += lambda * sweep(model, view, 1.0, false, fixed_steps, lambda, acc);
  }
  out.gradient = acc.pack(model);
  return out;
}

FitResult fit(const std::vector<ObservedRecord>& train_records,
              const std::vector<ObservedRecord>& val_records, const TrainConfig& cfg,
              const FlowModel& initial, const EpochCallback& on_epoch) {
  validate(cfg);
  if (train_records.empty() || val_records.empty()) {
    throw DomainError("fit: empty training or validation split");
  }

  FlowModel model = initial;
  model.cfg.hierarchy_weight = cfg.hierarchy_weight;
  if (cfg.loss == LossKind::Hierarchical &&
      model.cfg.mode != dyn::HierarchyMode::SharedGate) {
    throw ModeError("fit: hierarchical loss requires shared-gate mode");
  }

  net::ParamVector params = dyn::pack(model);
  VectorXd m1 = VectorXd::Zero(params.values.size());
  VectorXd m2 = VectorXd::Zero(params.values.size());
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;

  const odeint::SolverConfig val_cfg = odeint::SolverConfig::training(cfg.fixed_steps);
  const auto n = static_cast<int>(train_records.size());

  FitResult result;
  VectorXd best = params.values;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int bad_epochs = 0;

  rng::Engine shuffler(rng::derive(cfg.seed, 17));

  std::vector<ObservedRecord> batch;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    constexpr double pi = 3.14159265358979323846;
    const double lr = cfg.learning_rate * 0.5 *
                      (1.0 + std::cos(pi * static_cast<double>(epoch) / cfg.max_epochs));
    const std::vector<int> order = rng::shuffled_indices(n, shuffler);

    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int stop = std::min(n, start + cfg.batch_size);
      batch.clear();
      for (int k = start; k < stop; ++k) {
        batch.push_back(train_records[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])]);
      }
      LossGradient lg;
      try {
        lg = gradient(model, batch, cfg.loss, cfg.fixed_steps);
      } catch (const NonFiniteError& e) {
        throw DivergedError(std::string("fit: ") + e.what(), epoch);
      }
      if (!std::isfinite(lg.loss)) {
        throw DivergedError("fit: training loss became non-finite", epoch);
      }
      epoch_loss += lg.loss * static_cast<double>(stop - start);

      ++step;
      m1 = beta1 * m1 + (1.0 - beta1) * lg.gradient.values;
      m2 = beta2 * m2 +
           (1.0 - beta2) * lg.gradient.values.cwiseProduct(lg.gradient.values);
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      params.values -=
          (lr / bc1) * m1.cwiseQuotient(((m2 / bc2).cwiseSqrt().array() + eps).matrix());
      dyn::unpack(model, params.values);
    }
    epoch_loss /= static_cast<double>(n);

    double val;
    try {
      val = censored_nll(model, val_records, val_cfg);
    } catch (const NonFiniteError& e) {
      throw DivergedError(std::string("fit: ") + e.what(), epoch);
    }
    if (!std::isfinite(val)) {
      throw DivergedError("fit: validation loss became non-finite", epoch);
    }
    result.train_history.push_back(epoch_loss);
    result.val_history.push_back(val);
    if (on_epoch) on_epoch(epoch, epoch_loss, val, lr);

    if (val < best_val) {
      best_val = val;
      best = params.values;
      best_epoch = epoch;
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs > cfg.patience) break;
    }
  }

  dyn::unpack(model, best);
  result.model = std::move(model);
  result.best_epoch = best_epoch;
  result.best_val = best_val;
  return result;
}

}  // namespace survflow::train
