#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "survflow/data.hpp"
#include "survflow/dynamics.hpp"
#include "survflow/metrics.hpp"
#include "survflow/training.hpp"

namespace survflow::io {

inline constexpr int kSchemaVersion = 1;

/// Hex encoding of raw IEEE-754 doubles (16 chars each, bit-exact round trip).
std::string encode_doubles_hex(const Eigen::Ref<const Eigen::VectorXd>& values);
Eigen::VectorXd decode_doubles_hex(const std::string& hex);

struct TrainMeta {
  std::uint64_t seed = 0;
  int epochs = 0;
  int best_epoch = -1;
  double best_val_nll = 0.0;
  double final_train_loss = 0.0;
};

struct Checkpoint {
  dyn::DynamicsConfig dynamics;
  Eigen::VectorXd params;
  std::optional<data::Standardizer> standardizer;
  std::vector<std::string> feature_names;
  TrainMeta meta;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

dyn::FlowModel model_from_checkpoint(const Checkpoint& ckpt);
Checkpoint make_checkpoint(const dyn::FlowModel& model,
                           const std::optional<data::Standardizer>& standardizer,
                           const std::vector<std::string>& feature_names,
                           const TrainMeta& meta);

struct DataConfig {
  std::string name = "synthetic";
  int n = 3000;
  int dim = 10;
  std::uint64_t seed = 1;
  double mixture_p = 0.3;
  double target_censoring = 0.8;
  bool debug_columns = false;
};

struct EvalConfig {
  odeint::SolverConfig solver = odeint::SolverConfig::evaluation();
  int risk_samples = 64;
  std::uint64_t seed = 0;
  metrics::ScoreKind score_kind = metrics::ScoreKind::WinFraction;
  int threads = 1;
};

struct PortfolioConfig {
  int classes = 10;
  int entities_per_class = 20;
  int obs_per_entity = 15;
  double alpha = 0.95;
  double budget_fraction = 0.25;
  double horizon_quantile = 0.5;
  int pricing_scenarios = 100000;
  int optimization_scenarios = 10000;
  int realization_scenarios = 100000;
  std::uint64_t seed = 0;
};

struct RunConfig {
  DataConfig data;
  dyn::DynamicsConfig model;
  std::uint64_t model_seed = 0;
  train::TrainConfig train;
  double train_fraction = 0.7;
  double val_fraction = 0.15;
  EvalConfig eval;
  PortfolioConfig portfolio;
};

/// Parses and validates a RunConfig JSON document. Unknown keys are rejected;
/// a matching Table of per-dataset model defaults is applied when data.name is
/// one of the known study names before explicit settings take over.
RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_text(const std::string& json_text);

}  // namespace survflow::io
