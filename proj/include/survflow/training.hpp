#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "survflow/flow.hpp"

namespace survflow::train {

/// One right-censored observation: time y > 0, event indicator, covariates.
struct ObservedRecord {
  double time = 0.0;
  int event = 1;  // 1 = event observed, 0 = censored
  Eigen::VectorXd x;
};

enum class LossKind { Censored, Hierarchical };

struct TrainConfig {
  double learning_rate = 1e-2;
  int batch_size = 128;
  int max_epochs = 200;
  int patience = 20;              // epochs without validation improvement
  double hierarchy_weight = 1.0;  // lambda (hierarchical loss only)
  std::uint64_t seed = 0;
  int fixed_steps = 16;           // training-time RK4 steps
  LossKind loss = LossKind::Censored;
};

void validate(const TrainConfig& cfg);

/// -(1/n) sum_i [delta_i log f(y_i|x_i) + (1-delta_i) log S(y_i|x_i)].
double censored_nll(const dyn::FlowModel& model, std::span<const ObservedRecord> batch,
                    const odeint::SolverConfig& cfg = odeint::SolverConfig::training());

/// Censored NLL of the unconditional sub-flow (integration stopped at the gate
/// time, covariate gates frozen to 1) plus lambda times the conditional
/// censored NLL. Requires shared-gate mode.
double hierarchical_loss(const dyn::FlowModel& model,
                         std::span<const ObservedRecord> batch,
                         const odeint::SolverConfig& cfg = odeint::SolverConfig::training());

struct LossGradient {
  double loss = 0.0;
  net::ParamVector gradient;
};

/// Exact reverse-mode gradient of the chosen loss through every stage of the
/// fixed-step RK4 solver.
LossGradient gradient(const dyn::FlowModel& model, std::span<const ObservedRecord> batch,
                      LossKind kind, int fixed_steps = 16);

struct FitResult {
  dyn::FlowModel model;
  std::vector<double> train_history;
  std::vector<double> val_history;  // validation censored NLL per epoch
  int best_epoch = -1;
  double best_val = 0.0;
};

using EpochCallback =
    std::function<void(int epoch, double train_loss, double val_loss, double lr)>;

/// Adam with cosine learning-rate decay and early stopping; returns the
/// parameters achieving the best validation censored NLL.
FitResult fit(const std::vector<ObservedRecord>& train_records,
              const std::vector<ObservedRecord>& val_records, const TrainConfig& cfg,
              const dyn::FlowModel& initial, const EpochCallback& on_epoch = {});

/// Records as column-major matrices (covariates d x B, times, indicators).
struct BatchView {
  Eigen::MatrixXd X;
  Eigen::VectorXd times;
  std::vector<int> events;
};
BatchView batch_view(std::span<const ObservedRecord> batch, int covariate_dim);

}  // namespace survflow::train
