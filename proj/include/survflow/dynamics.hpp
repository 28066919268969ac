#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "survflow/netcore.hpp"

namespace survflow::dyn {

enum class HierarchyMode { None, SharedGate, Discrete, Continuous };

const char* to_string(HierarchyMode mode);
HierarchyMode hierarchy_mode_from_string(const std::string& name);

/// Architecture and gating configuration of a conditional flow.
struct DynamicsConfig {
  int covariate_dim = 0;
  int basis_count = 1;  // K: basis functions per hierarchy level
  int levels = 1;       // H: hierarchy levels
  HierarchyMode mode = HierarchyMode::None;

  double gate_time = 0.5;            // shared-gate threshold t_x in [0, 1]
  std::vector<double> breakpoints;   // discrete mode: increasing, last must be 1
  std::vector<double> centers;       // continuous mode: initial centers t_h
  std::vector<double> widths;        // continuous mode: initial widths c_h > 0

  int pi_width = 4;
  int pi_depth = 2;
  int sigma_width = 4;
  int sigma_depth = 2;
  int g_width = 8;
  int g_depth = 2;

  double hierarchy_weight = 1.0;  // lambda of the composite loss
};

void validate(const DynamicsConfig& cfg);

/// All learnable state of a conditional flow. The drift at (z, t, x) is
///   sum_{h,i} env_h(t) * pifac_{i,h}(x, t) * sigma_{i,h}(t) * g_{i,h}(z)
/// where pifac is the softmax covariate gate (replaced by 1 below the
/// shared-gate time), sigma the softmax time gate, and env_h the hierarchy
/// envelope (1, an interval indicator, or exp(-c_h (t - t_h)^2)).
struct FlowModel {
  DynamicsConfig cfg;
  std::vector<net::DenseNet> pi;     // H nets: covariate_dim -> K, softmax head
  std::vector<net::DenseNet> sigma;  // H nets: 1 -> K, softmax head
  std::vector<net::DenseNet> g;      // H*K nets: 1 -> 1, identity head
  Eigen::VectorXd centers;           // learnable in continuous mode
  Eigen::VectorXd log_widths;        // learnable in continuous mode

  const net::DenseNet& g_net(int level, int basis) const {
    return g[static_cast<std::size_t>(level) * cfg.basis_count + basis];
  }
  net::DenseNet& g_net(int level, int basis) {
    return g[static_cast<std::size_t>(level) * cfg.basis_count + basis];
  }
};

FlowModel init_model(const DynamicsConfig& cfg, std::uint64_t seed);

std::vector<int> pi_layer_sizes(const DynamicsConfig& cfg);
std::vector<int> sigma_layer_sizes(const DynamicsConfig& cfg);
std::vector<int> g_layer_sizes(const DynamicsConfig& cfg);

net::ParamLayout model_layout(const DynamicsConfig& cfg);
net::ParamVector pack(const FlowModel& model);
void unpack(FlowModel& model, const Eigen::Ref<const Eigen::VectorXd>& values);

/// Whether the covariate gate participates at flow time t.
inline bool pi_active(const DynamicsConfig& cfg, double t) {
  return cfg.mode != HierarchyMode::SharedGate || t > cfg.gate_time;
}

/// Hierarchy envelopes at time t (size H).
Eigen::VectorXd envelope_at(const FlowModel& model, double t);

/// Softmax time gates at time t, stacked per level (size K*H; entry i + h*K).
Eigen::VectorXd sigma_at(const FlowModel& model, double t);

/// Softmax covariate gates for a batch of covariate columns (K*H x B).
Eigen::MatrixXd pi_at(const FlowModel& model, const Eigen::MatrixXd& X);

/// dz/dt at one point.
double drift(const FlowModel& model, double z, double t, const Eigen::VectorXd& x);

/// Exact d(drift)/dz at one point (sign-free; callers orient it).
double drift_divergence(const FlowModel& model, double z, double t,
                        const Eigen::VectorXd& x);

/// The K*H effective mixture weights multiplying g_{i,h}(z) at (x, t).
Eigen::VectorXd gate_weights(const FlowModel& model, const Eigen::VectorXd& x, double t);

/// Precomputed time gates over a fixed time grid, shared across a batch.
struct TimeGateTable {
  Eigen::VectorXd times;  // T
  Eigen::MatrixXd sigma;  // (K*H) x T
  Eigen::MatrixXd env;    // H x T
};
TimeGateTable make_time_gate_table(const FlowModel& model, const Eigen::VectorXd& times);

/// Covariate gates for a batch of records; `frozen` marks the unconditional
/// sub-flow where every pi factor is the constant 1.
struct CovariateGates {
  Eigen::MatrixXd pifac;  // (K*H) x B; unused when frozen
  bool frozen = false;
  Eigen::Index batch = 0;
};
CovariateGates make_covariate_gates(const FlowModel& model, const Eigen::MatrixXd& X);
CovariateGates frozen_covariate_gates(Eigen::Index batch);

/// Batched drift (and optionally divergence) for a column of z values sharing
/// gating data: sigma_col/env_col as produced by sigma_at/envelope_at or one
/// column of a TimeGateTable; use_pi selects whether the covariate gate is
/// applied (shared-gate regions below t_x pass false).
void eval_field_batch(const FlowModel& model, const CovariateGates& gates, bool use_pi,
                      const Eigen::VectorXd& z, const Eigen::VectorXd& sigma_col,
                      const Eigen::VectorXd& env_col, Eigen::VectorXd& drift_out,
                      Eigen::VectorXd* div_out);

}  // namespace survflow::dyn
