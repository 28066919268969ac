#pragma once

#include <Eigen/Core>
#include <functional>
#include <span>

#include "survflow/flow.hpp"
#include "survflow/training.hpp"

namespace survflow::metrics {

/// Harrell's concordance. Comparable pairs are (i, j) with y_i < y_j and
/// delta_i = 1, credited 1 when s_i > s_j, 1/2 on score ties, 0 otherwise.
/// Pairs with equal times and both events observed enter the denominator with
/// the 1/2 credit. Returns 0.5 when no pair is comparable.
double harrell_concordance(std::span<const train::ObservedRecord> records,
                           const Eigen::VectorXd& scores);
double harrell_concordance(const Eigen::VectorXd& times, std::span<const int> events,
                           const Eigen::VectorXd& scores);

enum class ScoreKind {
  WinFraction,       // cross-record early-event win fraction of sampled times
  NegativeMeanTime,  // minus the mean sampled event time
};

struct RiskScoreConfig {
  int samples_per_record = 64;
  ScoreKind kind = ScoreKind::WinFraction;
  std::uint64_t seed = 0;
  int threads = 1;
  odeint::SolverConfig solver = odeint::SolverConfig::training();
};

/// Sampling-based risk scores: draw m event times per record from the flow;
/// with WinFraction, s_i is the fraction of cross-record draw comparisons the
/// record's draws lose first (higher score = earlier expected event).
Eigen::VectorXd sampled_risk_scores(const dyn::FlowModel& model,
                                    const Eigen::MatrixXd& X,
                                    const RiskScoreConfig& cfg);

/// Kolmogorov-Smirnov distance between samples and an analytic CDF.
double ks_distance(Eigen::VectorXd samples, const std::function<double(double)>& cdf);

}  // namespace survflow::metrics
