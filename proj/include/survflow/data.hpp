#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "survflow/rng.hpp"
#include "survflow/training.hpp"

namespace survflow::data {

using train::ObservedRecord;

/// Weibull(shape a, scale b): CDF 1 - exp(-(t/b)^a).
double weibull_sample(double shape, double scale, rng::Engine& rng);
double weibull_cdf(double t, double shape, double scale);
double weibull_log_pdf(double t, double shape, double scale);
double weibull_mean(double shape, double scale);

/// Coefficients of the synthetic right-censored generator:
///   X ~ U([0,1]^d)
///   T ~ p W(b1.x, b2.x) + (1-p) W(2 b3.x, b4.x)
///   C ~ W(b5.x, b6.x),  Y = min(T, C),  delta = 1{T <= C}.
struct SyntheticSpec {
  int dim = 10;
  double mixture_p = 0.3;
  std::vector<Eigen::VectorXd> beta;  // beta[0..5] = b1..b6, positive entries
  std::uint64_t seed = 0;             // seed the betas were drawn from

  /// Draws betas uniform on [0.5, 1.5] from `seed`, then rescales b6 so the
  /// censoring rate lands on `target_censoring` (Monte Carlo bisection).
  static SyntheticSpec calibrated(int dim, std::uint64_t seed,
                                  double target_censoring = 0.8);
};

void validate(const SyntheticSpec& spec);

/// Latent event and censoring times for one covariate vector.
std::pair<double, double> draw_event_censor(const SyntheticSpec& spec,
                                            const Eigen::VectorXd& x, rng::Engine& rng);

struct Dataset {
  Eigen::MatrixXd X;      // d x n covariates
  Eigen::VectorXd times;  // observed y
  std::vector<int> events;
  std::vector<std::string> feature_names;
  // Debug columns: the latent (T, C) pair behind each observation.
  std::optional<Eigen::VectorXd> raw_t;
  std::optional<Eigen::VectorXd> raw_c;

  Eigen::Index size() const { return times.size(); }
  int dim() const { return static_cast<int>(X.rows()); }
  double censoring_rate() const;
  ObservedRecord record(Eigen::Index i) const;
  std::vector<ObservedRecord> records() const;
};

Dataset generate_synthetic(const SyntheticSpec& spec, int n, std::uint64_t seed,
                           bool debug_raw = false);

/// Observations drawn from the spec's law at the given covariate columns.
Dataset generate_at_covariates(const SyntheticSpec& spec, const Eigen::MatrixXd& X,
                               int obs_per_column, std::uint64_t seed,
                               bool debug_raw = false);

struct PortfolioCovariates {
  Eigen::MatrixXd X;            // 10 x n_entities
  std::vector<int> classes;     // class index per entity
  Eigen::MatrixXd class_centers;
};

/// 10 class centers on [0,1]^10, entities = center + 0.1 * N(0, I).
PortfolioCovariates generate_portfolio_covariates(int n_classes, int n_entities,
                                                  std::uint64_t seed);

/// CSV with header `time,event,<features...>`; `raw_t`/`raw_c` columns are
/// read back as debug columns, not features.
Dataset load_csv(const std::string& path);
void write_csv(const Dataset& ds, const std::string& path);

struct SplitResult {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Disjoint partition stratified by the event indicator.
SplitResult split(const Dataset& ds, double train_fraction, double val_fraction,
                  rng::Engine& rng);

/// Covariate standardization (training-split statistics).
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // standard deviation floored at 1e-12

  static Standardizer fit(const Eigen::MatrixXd& X);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
};

}  // namespace survflow::data
