#include "survflow/dynamics.hpp"

#include <cmath>

#include "survflow/errors.hpp"

namespace survflow::dyn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(HierarchyMode mode) {
  switch (mode) {
    case HierarchyMode::None: return "none";
    case HierarchyMode::SharedGate: return "shared-gate";
    case HierarchyMode::Discrete: return "discrete";
    case HierarchyMode::Continuous: return "continuous";
  }
  return "?";
}

HierarchyMode hierarchy_mode_from_string(const std::string& name) {
  if (name == "none") return HierarchyMode::None;
  if (name == "shared-gate") return HierarchyMode::SharedGate;
  if (name == "discrete") return HierarchyMode::Discrete;
  if (name == "continuous") return HierarchyMode::Continuous;
  throw ConfigError("unknown hierarchy mode '" + name + "'");
}

void validate(const DynamicsConfig& cfg) {
  if (cfg.covariate_dim < 0) throw DomainError("DynamicsConfig: covariate_dim < 0");
  if (cfg.basis_count < 1) throw DomainError("DynamicsConfig: basis_count must be >= 1");
  if (cfg.levels < 1) throw DomainError("DynamicsConfig: levels must be >= 1");
  if (cfg.pi_depth < 0 || cfg.sigma_depth < 0 || cfg.g_depth < 0) {
    throw DomainError("DynamicsConfig: negative depth");
  }
  if ((cfg.pi_depth > 0 && cfg.pi_width < 1) ||
      (cfg.sigma_depth > 0 && cfg.sigma_width < 1) ||
      (cfg.g_depth > 0 && cfg.g_width < 1)) {
    throw DomainError("DynamicsConfig: hidden width must be >= 1");
  }
  switch (cfg.mode) {
    case HierarchyMode::None:
      if (cfg.levels != 1) throw DomainError("DynamicsConfig: mode none requires H=1");
      break;
    case HierarchyMode::SharedGate:
      if (cfg.levels != 1) {
        throw DomainError("DynamicsConfig: shared-gate requires H=1");
      }
      if (!(cfg.gate_time >= 0.0 && cfg.gate_time <= 1.0)) {
        throw DomainError("DynamicsConfig: gate_time must lie in [0, 1]");
      }
      break;
    case HierarchyMode::Discrete: {
      if (static_cast<int>(cfg.breakpoints.size()) != cfg.levels) {
        throw DomainError("DynamicsConfig: need one breakpoint per level");
      }
      double prev = 0.0;
      for (double b : cfg.breakpoints) {
        if (!(b > prev && b <= 1.0)) {
          throw DomainError("DynamicsConfig: breakpoints must increase within (0, 1]");
        }
        prev = b;
      }
      if (cfg.breakpoints.back() != 1.0) {
        throw DomainError("DynamicsConfig: last breakpoint must equal 1 so every t is gated");
      }
      break;
    }
    case HierarchyMode::Continuous:
      if (static_cast<int>(cfg.centers.size()) != cfg.levels ||
          static_cast<int>(cfg.widths.size()) != cfg.levels) {
        throw DomainError("DynamicsConfig: need one center and width per level");
      }
      for (double c : cfg.widths) {
        if (!(c > 0.0)) throw DomainError("DynamicsConfig: widths must be > 0");
      }
      break;
  }
}

std::vector<int> pi_layer_sizes(const DynamicsConfig& cfg) {
  std::vector<int> sizes{cfg.covariate_dim};
  for (int l = 0; l < cfg.pi_depth; ++l) sizes.push_back(cfg.pi_width);
  sizes.push_back(cfg.basis_count);
  return sizes;
}

std::vector<int> sigma_layer_sizes(const DynamicsConfig& cfg) {
  std::vector<int> sizes{1};
  for (int l = 0; l < cfg.sigma_depth; ++l) sizes.push_back(cfg.sigma_width);
  sizes.push_back(cfg.basis_count);
  return sizes;
}

std::vector<int> g_layer_sizes(const DynamicsConfig& cfg) {
  std::vector<int> sizes{1};
  for (int l = 0; l < cfg.g_depth; ++l) sizes.push_back(cfg.g_width);
  sizes.push_back(1);
  return sizes;
}

FlowModel init_model(const DynamicsConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  FlowModel model;
  model.cfg = cfg;
  std::uint64_t stream = 0;
  for (int h = 0; h < cfg.levels; ++h) {
    rng::Engine e(rng::derive(seed, stream++));
    model.pi.push_back(net::init_dense(pi_layer_sizes(cfg), net::Head::Softmax, e));
  }
  for (int h = 0; h < cfg.levels; ++h) {
    rng::Engine e(rng::derive(seed, stream++));
    model.sigma.push_back(net::init_dense(sigma_layer_sizes(cfg), net::Head::Softmax, e));
  }
  for (int h = 0; h < cfg.levels; ++h) {
    for (int i = 0; i < cfg.basis_count; ++i) {
      rng::Engine e(rng::derive(seed, stream++));
      model.g.push_back(net::init_dense(g_layer_sizes(cfg), net::Head::Identity, e));
    }
  }
  if (cfg.mode == HierarchyMode::Continuous) {
    model.centers = Eigen::Map<const VectorXd>(cfg.centers.data(), cfg.levels);
    model.log_widths = VectorXd(cfg.levels);
    for (int h = 0; h < cfg.levels; ++h) {
      model.log_widths[h] = std::log(cfg.widths[static_cast<std::size_t>(h)]);
    }
  }
  return model;
}

net::ParamLayout model_layout(const DynamicsConfig& cfg) {
  auto count = [](const std::vector<int>& sizes) {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      n += static_cast<Eigen::Index>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
    }
    return n;
  };
  net::ParamLayout layout;
  Eigen::Index offset = 0;
  auto add = [&](const std::string& name, Eigen::Index size) {
    layout.segments.push_back({name, offset, size});
    offset += size;
  };
  const Eigen::Index n_pi = count(pi_layer_sizes(cfg));
  const Eigen::Index n_sigma = count(sigma_layer_sizes(cfg));
  const Eigen::Index n_g = count(g_layer_sizes(cfg));
  for (int h = 0; h < cfg.levels; ++h) add("pi." + std::to_string(h), n_pi);
  for (int h = 0; h < cfg.levels; ++h) add("sigma." + std::to_string(h), n_sigma);
  for (int h = 0; h < cfg.levels; ++h) {
    for (int i = 0; i < cfg.basis_count; ++i) {
      add("g." + std::to_string(h) + "." + std::to_string(i), n_g);
    }
  }
  if (cfg.mode == HierarchyMode::Continuous) {
    add("hier.centers", cfg.levels);
    add("hier.log_widths", cfg.levels);
  }
  return layout;
}

net::ParamVector pack(const FlowModel& model) {
  net::ParamVector pv;
  pv.layout = model_layout(model.cfg);
  pv.values.resize(pv.layout.total());
  Eigen::Index k = 0;
  for (const auto& n : model.pi) k += net::pack_net(n, pv.values.segment(k, pv.values.size() - k));
  for (const auto& n : model.sigma) k += net::pack_net(n, pv.values.segment(k, pv.values.size() - k));
  for (const auto& n : model.g) k += net::pack_net(n, pv.values.segment(k, pv.values.size() - k));
  if (model.cfg.mode == HierarchyMode::Continuous) {
    pv.values.segment(k, model.centers.size()) = model.centers;
    k += model.centers.size();
    pv.values.segment(k, model.log_widths.size()) = model.log_widths;
    k += model.log_widths.size();
  }
  if (k != pv.values.size()) throw DimensionError("pack: layout size mismatch");
  return pv;
}

void unpack(FlowModel& model, const Eigen::Ref<const Eigen::VectorXd>& values) {
  Eigen::Index k = 0;
  for (auto& n : model.pi) k += net::unpack_net(n, values.segment(k, values.size() - k));
  for (auto& n : model.sigma) k += net::unpack_net(n, values.segment(k, values.size() - k));
  for (auto& n : model.g) k += net::unpack_net(n, values.segment(k, values.size() - k));
  if (model.cfg.mode == HierarchyMode::Continuous) {
    model.centers = values.segment(k, model.cfg.levels);
    k += model.cfg.levels;
    model.log_widths = values.segment(k, model.cfg.levels);
    k += model.cfg.levels;
  }
  if (k != values.size()) throw DimensionError("unpack: parameter vector size mismatch");
}

VectorXd envelope_at(const FlowModel& model, double t) {
  const auto& cfg = model.cfg;
  VectorXd env = VectorXd::Ones(cfg.levels);
  switch (cfg.mode) {
    case HierarchyMode::None:
    case HierarchyMode::SharedGate:
      break;
    case HierarchyMode::Discrete: {
      env.setZero();
      double lo = 0.0;
      for (int h = 0; h < cfg.levels; ++h) {
        const double hi = cfg.breakpoints[static_cast<std::size_t>(h)];
        // level 0 is closed at t = 0 so every t in [0, 1] is gated
        const bool in = (h == 0) ? (t >= 0.0 && t <= hi) : (t > lo && t <= hi);
        if (in) {
          env[h] = 1.0;
          break;
        }
        lo = hi;
      }
      break;
    }
    case HierarchyMode::Continuous:
      for (int h = 0; h < cfg.levels; ++h) {
        const double c = std::exp(model.log_widths[h]);
        const double dt = t - model.centers[h];
        env[h] = std::exp(-c * dt * dt);
      }
      break;
  }
  return env;
}

VectorXd sigma_at(const FlowModel& model, double t) {
  const auto& cfg = model.cfg;
  VectorXd out(static_cast<Eigen::Index>(cfg.basis_count) * cfg.levels);
  MatrixXd input(1, 1);
  input(0, 0) = t;
  for (int h = 0; h < cfg.levels; ++h) {
    const MatrixXd y = net::forward(model.sigma[static_cast<std::size_t>(h)], input);
    out.segment(static_cast<Eigen::Index>(h) * cfg.basis_count, cfg.basis_count) =
        y.col(0);
  }
  return out;
}

MatrixXd pi_at(const FlowModel& model, const MatrixXd& X) {
  const auto& cfg = model.cfg;
  MatrixXd out(static_cast<Eigen::Index>(cfg.basis_count) * cfg.levels, X.cols());
  for (int h = 0; h < cfg.levels; ++h) {
    out.middleRows(static_cast<Eigen::Index>(h) * cfg.basis_count, cfg.basis_count) =
        net::forward(model.pi[static_cast<std::size_t>(h)], X);
  }
  return out;
}

CovariateGates make_covariate_gates(const FlowModel& model, const MatrixXd& X) {
  CovariateGates gates;
  gates.pifac = pi_at(model, X);
  gates.frozen = false;
  gates.batch = X.cols();
  return gates;
}

CovariateGates frozen_covariate_gates(Eigen::Index batch) {
  CovariateGates gates;
  gates.frozen = true;
  gates.batch = batch;
  return gates;
}

TimeGateTable make_time_gate_table(const FlowModel& model, const VectorXd& times) {
  const auto& cfg = model.cfg;
  TimeGateTable table;
  table.times = times;
  const Eigen::Index T = times.size();
  table.sigma.resize(static_cast<Eigen::Index>(cfg.basis_count) * cfg.levels, T);
  table.env.resize(cfg.levels, T);
  MatrixXd trow(1, T);
  trow.row(0) = times.transpose();
  for (int h = 0; h < cfg.levels; ++h) {
    table.sigma.middleRows(static_cast<Eigen::Index>(h) * cfg.basis_count,
                           cfg.basis_count) =
        net::forward(model.sigma[static_cast<std::size_t>(h)], trow);
  }
  for (Eigen::Index j = 0; j < T; ++j) {
    table.env.col(j) = envelope_at(model, times[j]);
  }
  return table;
}

void eval_field_batch(const FlowModel& model, const CovariateGates& gates, bool use_pi,
                      const VectorXd& z, const VectorXd& sigma_col,
                      const VectorXd& env_col, VectorXd& drift_out, VectorXd* div_out) {
  const auto& cfg = model.cfg;
  const Eigen::Index B = z.size();
  const Eigen::Index KH = static_cast<Eigen::Index>(cfg.basis_count) * cfg.levels;
  const bool apply_pi = use_pi && !gates.frozen;
  if (apply_pi && gates.pifac.cols() != B) {
    throw DimensionError("eval_field_batch: covariate gate batch mismatch");
  }

  // Combined time weight per (i, h): env_h * sigma_{i,h}.
  VectorXd se(KH);
  for (int h = 0; h < cfg.levels; ++h) {
    se.segment(static_cast<Eigen::Index>(h) * cfg.basis_count, cfg.basis_count) =
        env_col[h] *
        sigma_col.segment(static_cast<Eigen::Index>(h) * cfg.basis_count,
                          cfg.basis_count);
  }

  const MatrixXd zrow = z.transpose();
  drift_out.setZero(B);
  if (div_out) div_out->setZero(B);
  MatrixXd ones = MatrixXd::Ones(1, B);
  MatrixXd gv, gd;
  for (int h = 0; h < cfg.levels; ++h) {
    if (env_col[h] == 0.0) continue;  // inactive discrete level
    for (int i = 0; i < cfg.basis_count; ++i) {
      const Eigen::Index kh = static_cast<Eigen::Index>(h) * cfg.basis_count + i;
      const auto& gnet = model.g_net(h, i);
      if (div_out) {
        net::forward_tangent(gnet, zrow, ones, gv, gd);
      } else {
        gv = net::forward(gnet, zrow);
      }
      Eigen::ArrayXd w(B);
      if (apply_pi) {
        w = se[kh] * gates.pifac.row(kh).transpose().array();
      } else {
        w.setConstant(se[kh]);
      }
      drift_out.array() += w * gv.row(0).transpose().array();
      if (div_out) div_out->array() += w * gd.row(0).transpose().array();
    }
  }
}

namespace {

VectorXd weights_at(const FlowModel& model, const VectorXd& x, double t) {
  const auto& cfg = model.cfg;
  if (x.size() != cfg.covariate_dim) {
    throw DimensionError("dynamics: covariate dimension mismatch");
  }
  const VectorXd se_sigma = sigma_at(model, t);
  const VectorXd env = envelope_at(model, t);
  const Eigen::Index KH = static_cast<Eigen::Index>(cfg.basis_count) * cfg.levels;
  VectorXd w(KH);
  for (int h = 0; h < cfg.levels; ++h) {
    w.segment(static_cast<Eigen::Index>(h) * cfg.basis_count, cfg.basis_count) =
        env[h] *
        se_sigma.segment(static_cast<Eigen::Index>(h) * cfg.basis_count,
                         cfg.basis_count);
  }
  if (pi_active(cfg, t)) {
    const MatrixXd pifac = pi_at(model, MatrixXd(x));
    w = w.cwiseProduct(pifac.col(0));
  }
  return w;
}

}  // namespace

double drift(const FlowModel& model, double z, double t, const VectorXd& x) {
  const VectorXd w = weights_at(model, x, t);
  MatrixXd zin(1, 1);
  zin(0, 0) = z;
  double acc = 0.0;
  for (int h = 0; h < model.cfg.levels; ++h) {
    for (int i = 0; i < model.cfg.basis_count; ++i) {
      const Eigen::Index kh = static_cast<Eigen::Index>(h) * model.cfg.basis_count + i;
      if (w[kh] == 0.0) continue;
      acc += w[kh] * net::forward(model.g_net(h, i), zin)(0, 0);
    }
  }
  if (!std::isfinite(acc)) throw NonFiniteError("drift: non-finite value");
  return acc;
}

double drift_divergence(const FlowModel& model, double z, double t, const VectorXd& x) {
  const VectorXd w = weights_at(model, x, t);
  MatrixXd zin(1, 1), ones = MatrixXd::Ones(1, 1);
  zin(0, 0) = z;
  MatrixXd gv, gd;
  double acc = 0.0;
  for (int h = 0; h < model.cfg.levels; ++h) {
    for (int i = 0; i < model.cfg.basis_count; ++i) {
      const Eigen::Index kh = static_cast<Eigen::Index>(h) * model.cfg.basis_count + i;
      if (w[kh] == 0.0) continue;
      net::forward_tangent(model.g_net(h, i), zin, ones, gv, gd);
      acc += w[kh] * gd(0, 0);
    }
  }
  if (!std::isfinite(acc)) throw NonFiniteError("drift_divergence: non-finite value");
  return acc;
}

VectorXd gate_weights(const FlowModel& model, const VectorXd& x, double t) {
  return weights_at(model, x, t);
}

}  // namespace survflow::dyn
