#include "survflow/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <thread>

#include "survflow/errors.hpp"

namespace survflow::metrics {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double harrell_concordance(const VectorXd& times, std::span<const int> events,
                           const VectorXd& scores) {
  const Eigen::Index n = times.size();
  if (n == 0) throw DomainError("concordance: empty dataset");
  if (scores.size() != n || static_cast<Eigen::Index>(events.size()) != n) {
    throw DimensionError("concordance: length mismatch");
  }
  double pairs = 0.0, credit = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (times[i] == times[j]) {
        if (events[static_cast<std::size_t>(i)] && events[static_cast<std::size_t>(j)]) {
          pairs += 1.0;
          credit += 0.5;
        }
        continue;
      }
      const Eigen::Index e = times[i] < times[j] ? i : j;  // earlier record
      const Eigen::Index l = e == i ? j : i;
      if (!events[static_cast<std::size_t>(e)]) continue;
      pairs += 1.0;
      if (scores[e] > scores[l]) {
        credit += 1.0;
      } else if (scores[e] == scores[l]) {
        credit += 0.5;
      }
    }
  }
  return pairs > 0.0 ? credit / pairs : 0.5;
}

double harrell_concordance(std::span<const train::ObservedRecord> records,
                           const VectorXd& scores) {
  const auto n = static_cast<Eigen::Index>(records.size());
  VectorXd times(n);
  std::vector<int> events(records.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    times[i] = records[static_cast<std::size_t>(i)].time;
    events[static_cast<std::size_t>(i)] = records[static_cast<std::size_t>(i)].event;
  }
  return harrell_concordance(times, events, scores);
}

namespace {

// Draws the n x m sample matrix column-block by column-block; each record's
// draws use an independent substream so results are thread-count invariant.
MatrixXd draw_samples(const dyn::FlowModel& model, const MatrixXd& X,
                      const RiskScoreConfig& cfg) {
  const Eigen::Index n = X.cols();
  const int m = cfg.samples_per_record;
  MatrixXd draws(m, n);

  auto run_record = [&](Eigen::Index i) {
    rng::Engine rec_rng(rng::derive(cfg.seed, 0x9100 + static_cast<std::uint64_t>(i)));
    draws.col(i) = flow::sample_batch(model, X.col(i), m, rec_rng, cfg.solver);
  };

  const int threads = std::max(1, cfg.threads);
  if (threads == 1) {
    for (Eigen::Index i = 0; i < n; ++i) run_record(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<Eigen::Index> next{0};
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&]() {
        for (Eigen::Index i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
          run_record(i);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  return draws;
}

}  // namespace

VectorXd sampled_risk_scores(const dyn::FlowModel& model, const MatrixXd& X,
                             const RiskScoreConfig& cfg) {
  if (cfg.samples_per_record < 1) {
    throw DomainError("sampled_risk_scores: need at least one sample per record");
  }
  const Eigen::Index n = X.cols();
  if (n < 1) throw DomainError("sampled_risk_scores: empty covariate matrix");
  const int m = cfg.samples_per_record;
  const MatrixXd draws = draw_samples(model, X, cfg);

  VectorXd scores(n);
  if (cfg.kind == ScoreKind::NegativeMeanTime) {
    scores = -draws.colwise().mean().transpose();
    return scores;
  }

  // Win fraction via pooled ranks: for each of record i's draws count the
  // draws of other records that are strictly larger.
  std::vector<double> pooled(draws.data(), draws.data() + draws.size());
  std::sort(pooled.begin(), pooled.end());
  const double total = static_cast<double>(pooled.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> own(draws.col(i).data(), draws.col(i).data() + m);
    std::sort(own.begin(), own.end());
    double wins = 0.0;
    for (int k = 0; k < m; ++k) {
      const double v = own[static_cast<std::size_t>(k)];
      const double above_all =
          total - static_cast<double>(std::upper_bound(pooled.begin(), pooled.end(), v) -
                                      pooled.begin());
      const double above_own =
          static_cast<double>(m) -
          static_cast<double>(std::upper_bound(own.begin(), own.end(), v) - own.begin());
      wins += above_all - above_own;
    }
    scores[i] = wins / (static_cast<double>(m) * m * static_cast<double>(n - 1));
  }
  return scores;
}

double ks_distance(VectorXd samples, const std::function<double(double)>& cdf) {
  const Eigen::Index n = samples.size();
  if (n == 0) throw DomainError("ks_distance: empty sample");
  std::sort(samples.data(), samples.data() + n);
  double d = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double f = cdf(samples[i]);
    const double lo = static_cast<double>(i) / static_cast<double>(n);
    const double hi = static_cast<double>(i + 1) / static_cast<double>(n);
    d = std::max(d, std::max(f - lo, hi - f));
  }
  return d;
}

}  // namespace survflow::metrics
