// Acceptance suite: one pass/fail line per criterion, selectable with
// --only N. Exit code 0 on pass, 1 on failure, 77 when a criterion must be
// skipped for lack of external data.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstdarg>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "survflow/metrics.hpp"
#include "survflow/pipeline.hpp"
#include "survflow/portfolio.hpp"
#include "test_util.hpp"

using namespace survflow;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Outcome {
  bool pass = false;
  bool skipped = false;
  std::string detail;
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Solver convergence order on dz/dt = z over step counts {8, 16, 32, 64}.
Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  odeint::Field field = [](double, const VectorXd& y, VectorXd& dy) { dy = y; };
  VectorXd y0(1), exact(1);
  y0[0] = 1.0;
  exact[0] = std::exp(1.0);
  const std::vector<int> steps{8, 16, 32, 64};
  const odeint::OrderProbe rk4 =
      odeint::order_probe(odeint::Method::FixedRK4, field, y0, 0.0, 1.0, exact, steps);
  const odeint::OrderProbe tsit = odeint::order_probe(odeint::Method::AdaptiveRK54,
                                                      field, y0, 0.0, 1.0, exact, steps);
  const double elapsed = seconds_since(t0);
  Outcome out;
  out.pass = !rk4.degenerate && !tsit.degenerate && rk4.slope >= 3.7 &&
             tsit.slope >= 4.5 && elapsed < 1.0;
  out.detail = fmt("fixed-RK4 slope %.3f (need >= 3.7), RK5(4) slope %.3f (need >= 4.5), %.2fs (< 1s)",
                   rk4.slope, tsit.slope, elapsed);
  return out;
}

// ---------------------------------------------------------------------------
// 2. Reverse-mode gradients of the censored NLL match central finite
// differences coordinate by coordinate on 20 random models.
Outcome criterion2() {
  const auto t0 = std::chrono::steady_clock::now();
  int checked = 0, failed = 0;
  for (int rep = 0; rep < 20; ++rep) {
    testutil::RandomModelOptions opts;
    opts.covariate_dim = 2;
    const dyn::FlowModel model = testutil::random_model(5000 + rep, opts);
    rng::Engine rng(900 + rep);
    std::vector<train::ObservedRecord> batch;
    for (int i = 0; i < 8; ++i) {
      train::ObservedRecord r;
      r.x = VectorXd(2);
      r.x[0] = rng.uniform(-1.0, 1.0);
      r.x[1] = rng.uniform(-1.0, 1.0);
      r.time = std::exp(rng.uniform(-1.2, 1.2));
      r.event = i % 2;  // mixed censored and uncensored
      batch.push_back(std::move(r));
    }
    const int steps = 8;
    const train::LossGradient lg =
        train::gradient(model, batch, train::LossKind::Censored, steps);
    const VectorXd p0 = dyn::pack(model).values;
    auto loss_at = [&](const VectorXd& p) {
      dyn::FlowModel m = model;
      dyn::unpack(m, p);
      return train::censored_nll(m, batch, odeint::SolverConfig::training(steps));
    };
    for (Eigen::Index k = 0; k < p0.size(); ++k) {
      ++checked;
      const double g = lg.gradient.values[k];
      bool ok = false;
      // The discretized divergence is piecewise smooth (SELU derivative
      // kink), so a probe that straddles a jump retries at a smaller step.
      for (double h : {1e-5, 1e-6}) {
        VectorXd pp = p0, pm = p0;
        pp[k] += h;
        pm[k] -= h;
        const double fd = (loss_at(pp) - loss_at(pm)) / (2.0 * h);
        if (std::abs(g) < 1e-8 && std::abs(fd) < 1e-8) {
          ok = true;
          break;
        }
        if (std::abs(g - fd) < 1e-4 * std::max(std::abs(fd), std::abs(g))) {
          ok = true;
          break;
        }
      }
      if (!ok) ++failed;
    }
  }
  const double elapsed = seconds_since(t0);
  Outcome out;
  out.pass = failed == 0 && elapsed < 60.0;
  out.detail = fmt("%d coordinates checked, %d mismatched (tol 1e-4 rel / 1e-8 abs), %.1fs (< 60s)",
                   checked, failed, elapsed);
  return out;
}

// ---------------------------------------------------------------------------
// 3. Density normalization and the survival identities on 10 random models.
Outcome criterion3() {
  const auto t0 = std::chrono::steady_clock::now();
  odeint::SolverConfig cfg;
  cfg.rtol = 1e-10;
  cfg.atol = 1e-12;
  double worst_norm = 0.0, worst_hfs = 0.0, worst_ds = 0.0, worst_q = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const dyn::FlowModel model = testutil::random_model(7000 + rep);
    rng::Engine rng(910 + rep);
    VectorXd x(model.cfg.covariate_dim);
    for (int j = 0; j < x.size(); ++j) x[j] = rng.uniform(-1.0, 1.0);

    // Normalization: composite Simpson over log time, evaluated as one
    // batched backward pass. Strongly contracting models concentrate their
    // density on narrow peaks, so the rule uses a fine 24000-interval grid;
    // refinement studies put its error near 2e-5, far inside the 1e-3 budget.
    const int B = 24001;
    VectorXd ws(B), ts(B);
    for (int i = 0; i < B; ++i) {
      ws[i] = -12.0 + 24.0 * i / (B - 1);
      ts[i] = std::exp(ws[i]);
    }
    MatrixXd Xrep(x.size(), B);
    Xrep.colwise() = x;
    const flow::EvalBatch ev =
        flow::evaluate_batch(model, ts, Xrep, odeint::SolverConfig::training(64));
    double mass = 0.0;
    for (int i = 0; i < B; ++i) {
      const double coef = (i == 0 || i == B - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      mass += coef * std::exp(ev.log_density[i] + ws[i]);
    }
    mass *= (24.0 / (B - 1)) / 3.0;
    worst_norm = std::max(worst_norm, std::abs(mass - 1.0));

    for (double t : {0.53, 0.97, 1.41, 2.3}) {
      const double h = flow::hazard(model, t, x, cfg);
      const double f = std::exp(flow::log_density(model, t, x, cfg));
      const double s = flow::survival(model, t, x, cfg);
      worst_hfs = std::max(worst_hfs, std::abs(h - f / s) / std::max(1.0, h));
      const double dS = testutil::central_diff(
          [&](double tt) { return flow::survival(model, tt, x, cfg); }, t, 1e-5 * t);
      worst_ds = std::max(worst_ds, std::abs(dS + f) / std::max(1.0, f));
    }
    for (double u : {0.1, 0.25, 0.5, 0.75, 0.9}) {
      const double q = flow::quantile(model, x, u, cfg);
      worst_q = std::max(worst_q, std::abs(flow::survival(model, q, x, cfg) - (1.0 - u)));
    }
  }
  const double elapsed = seconds_since(t0);
  Outcome out;
  out.pass = worst_norm < 1e-3 && worst_hfs < 1e-10 && worst_ds < 1e-3 &&
             worst_q < 1e-3 && elapsed < 120.0;
  out.detail = fmt("|int f - 1| %.2e (<1e-3), |h - f/S| %.2e (<1e-10), |dS/dt + f| %.2e (<1e-3), |S(q_u) - (1-u)| %.2e (<1e-3), %.1fs (< 120s)",
                   worst_norm, worst_hfs, worst_ds, worst_q, elapsed);
  return out;
}

// ---------------------------------------------------------------------------
// 4. Unconditional recovery of a Weibull(1.5, 1) law from 3000 draws.
Outcome criterion4() {
  const auto t0 = std::chrono::steady_clock::now();
  const double shape = 1.5, scale = 1.0;
  rng::Engine gen(411);
  std::vector<train::ObservedRecord> all;
  for (int i = 0; i < 3000; ++i) {
    all.push_back({data::weibull_sample(shape, scale, gen), 1, VectorXd::Zero(0)});
  }
  const std::vector<train::ObservedRecord> tr(all.begin(), all.begin() + 2400);
  const std::vector<train::ObservedRecord> held(all.begin() + 2400, all.end());

  dyn::DynamicsConfig cfg;
  cfg.covariate_dim = 0;
  cfg.basis_count = 4;
  cfg.pi_width = 2;
  cfg.pi_depth = 1;
  cfg.sigma_width = 4;
  cfg.sigma_depth = 2;
  cfg.g_width = 8;
  cfg.g_depth = 2;
  const dyn::FlowModel init = dyn::init_model(cfg, 42);
  train::TrainConfig tcfg;
  tcfg.learning_rate = 0.02;
  tcfg.batch_size = 256;
  tcfg.max_epochs = 120;
  tcfg.patience = 25;
  tcfg.seed = 7;
  const train::FitResult fit = train::fit(tr, held, tcfg, init);

  // KS distance between the model CDF and the true Weibull CDF on the true
  // quantile grid.
  const odeint::SolverConfig eval_cfg = odeint::SolverConfig::training(32);
  const int grid = 399;
  VectorXd ts(grid);
  for (int i = 0; i < grid; ++i) {
    const double u = (i + 1.0) / (grid + 1.0);
    ts[i] = scale * std::pow(-std::log1p(-u), 1.0 / shape);
  }
  const flow::EvalBatch ev =
      flow::evaluate_batch(fit.model, ts, MatrixXd::Zero(0, grid), eval_cfg);
  double ks = 0.0;
  for (int i = 0; i < grid; ++i) {
    const double model_cdf = 1.0 - ev.survival[i];
    ks = std::max(ks, std::abs(model_cdf - (i + 1.0) / (grid + 1.0)));
  }

  // Censored NLL against the analytic optimum on the held-out set.
  double oracle = 0.0;
  for (const auto& r : held) oracle -= data::weibull_log_pdf(r.time, shape, scale);
  oracle /= static_cast<double>(held.size());
  const double nll = train::censored_nll(fit.model, held, eval_cfg);

  const double elapsed = seconds_since(t0);
  Outcome out;
  out.pass = ks < 0.05 && std::abs(nll - oracle) < 0.05 && elapsed < 600.0;
  out.detail = fmt("KS to true CDF %.4f (< 0.05), held-out NLL %.4f vs analytic %.4f (|diff| < 0.05), %.0fs (< 600s)",
                   ks, nll, oracle, elapsed);
  return out;
}

// ---------------------------------------------------------------------------
// 5. Synthetic concordance at the scale of the published benchmark.
Outcome criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  const data::SyntheticSpec spec = data::SyntheticSpec::calibrated(10, 501, 0.8);
  const data::Dataset ds = data::generate_synthetic(spec, 3000, 502);

  dyn::DynamicsConfig mcfg;
  mcfg.basis_count = 16;
  mcfg.pi_width = 4;
  mcfg.pi_depth = 3;
  mcfg.sigma_width = 4;
  mcfg.sigma_depth = 3;
  mcfg.g_width = 12;
  mcfg.g_depth = 3;

  train::TrainConfig tcfg;
  tcfg.learning_rate = 0.01;
  tcfg.batch_size = 256;
  tcfg.max_epochs = 120;
  tcfg.patience = 25;
  tcfg.seed = 503;

  const pipeline::TrainedModel trained =
      pipeline::train_on_dataset(ds, mcfg, 504, tcfg, 0.70, 0.15);

  // Held-out evaluation on the remaining test split.
  rng::Engine split_rng(rng::derive(tcfg.seed, 23));
  const data::SplitResult parts = data::split(ds, 0.70, 0.15, split_rng);
  io::EvalConfig ecfg;
  ecfg.risk_samples = 64;
  ecfg.seed = 505;
  ecfg.solver = odeint::SolverConfig::training(16);
  const pipeline::EvalReport report =
      pipeline::evaluate_model(trained.model, trained.standardizer, parts.test, ecfg);

  const double elapsed = seconds_since(t0);
  Outcome out;
  out.pass = report.concordance >= 0.70 && report.concordance <= 0.85 &&
             elapsed < 1800.0;
  out.detail = fmt("held-out concordance %.4f (target band 0.70-0.85; published point 0.796 not reproducible without the authors' coefficients), censoring %.2f, %.0fs (< 1800s)",
                   report.concordance, ds.censoring_rate(), elapsed);
  return out;
}

// ---------------------------------------------------------------------------
// 6. Sampling consistency: empirical survival of draws matches survival().
Outcome criterion6() {
  const auto t0 = std::chrono::steady_clock::now();
  const dyn::FlowModel model = testutil::random_model(600);
  const odeint::SolverConfig cfg = odeint::SolverConfig::training(32);
  const int n = 10000;
  rng::Engine xgen(601);
  double worst = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    VectorXd x(model.cfg.covariate_dim);
    for (int j = 0; j < x.size(); ++j) x[j] = xgen.uniform(-1.0, 1.0);
    rng::Engine rng(rng::derive(602, rep));
    const VectorXd t = flow::sample_batch(model, x, n, rng, cfg);
    MatrixXd X(x.size(), n);
    X.colwise() = x;
    const flow::EvalBatch ev = flow::evaluate_batch(model, t, X, cfg);
    std::vector<std::pair<double, double>> pairs(n);
    for (int i = 0; i < n; ++i) pairs[i] = {t[i], 1.0 - ev.survival[i]};
    std::sort(pairs.begin(), pairs.end());
    double sup = 0.0;
    for (int i = 0; i < n; ++i) {
      const double lo = static_cast<double>(i) / n;
      const double hi = static_cast<double>(i + 1) / n;
      sup = std::max(sup, std::max(pairs[i].second - lo, hi - pairs[i].second));
    }
    worst = std::max(worst, sup);
  }
  const double elapsed = seconds_since(t0);
  Outcome out;
  out.pass = worst < 0.02 && elapsed < 120.0;
  out.detail = fmt("worst sup-distance over 5 covariate draws %.4f (< 0.02), %.1fs (< 120s)",
                   worst, elapsed);
  return out;
}

// ---------------------------------------------------------------------------
// 7. CVaR machinery against brute-force oracles.
namespace c7 {

// Exhaustive oracle. For one or two entities the budget pins the remaining
// weight, leaving at most one free coordinate scanned on a fine lattice. For
// three entities the reduced problem is two-dimensional and the exact optimum
// of the piecewise-linear convex objective lies on an arrangement vertex:
// a corner of the feasible polygon, a tie-line crossing an edge, or two
// tie-lines crossing; all candidates are enumerated exactly.
double oracle(const portfolio::PortfolioInstance& inst) {
  const Eigen::Index n = inst.prices.size();
  const Eigen::Index N = inst.defaults.rows();
  MatrixXd R = inst.defaults;
  R.rowwise() -= inst.prices.transpose();
  auto es_at = [&](const VectorXd& w) {
    return portfolio::expected_shortfall(R * w, inst.alpha);
  };

  if (n == 1) {
    VectorXd w(1);
    w[0] = inst.budget / inst.prices[0];
    return es_at(w);
  }
  if (n == 2) {
    double best = std::numeric_limits<double>::infinity();
    const int steps = 50000;
    for (int i = 0; i <= steps; ++i) {
      VectorXd w(2);
      w[0] = static_cast<double>(i) / steps;
      w[1] = (inst.budget - inst.prices[0] * w[0]) / inst.prices[1];
      if (w[1] < -1e-12 || w[1] > 1.0 + 1e-12) continue;
      w[1] = std::clamp(w[1], 0.0, 1.0);
      best = std::min(best, es_at(w));
    }
    return best;
  }

  // n == 3: reduce to (w0, w1); w2 = (budget - p0 w0 - p1 w1) / p2.
  const double p0 = inst.prices[0], p1 = inst.prices[1], p2 = inst.prices[2];
  auto lift = [&](double a, double b) {
    VectorXd w(3);
    w[0] = a;
    w[1] = b;
    w[2] = (inst.budget - p0 * a - p1 * b) / p2;
    return w;
  };
  auto feasible = [&](const VectorXd& w) {
    return w.minCoeff() >= -1e-9 && w.maxCoeff() <= 1.0 + 1e-9;
  };
  // Lines alpha*a + beta*b = gamma: box edges of w0, w1, w2 and scenario ties.
  struct Line {
    double alpha, beta, gamma;
  };
  std::vector<Line> lines;
  lines.push_back({1, 0, 0});
  lines.push_back({1, 0, 1});
  lines.push_back({0, 1, 0});
  lines.push_back({0, 1, 1});
  // w2 = 0 and w2 = 1
  lines.push_back({p0, p1, inst.budget});
  lines.push_back({p0, p1, inst.budget - p2});
  for (Eigen::Index j = 0; j < N; ++j) {
    for (Eigen::Index k = j + 1; k < N; ++k) {
      // (R_j - R_k) . w = 0 in reduced coordinates
      const VectorXd d = (R.row(j) - R.row(k)).transpose();
      const double alpha = d[0] - d[2] * p0 / p2;
      const double beta = d[1] - d[2] * p1 / p2;
      const double gamma = -d[2] * inst.budget / p2;
      lines.push_back({alpha, beta, gamma});
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < lines.size(); ++a) {
    for (std::size_t b = a + 1; b < lines.size(); ++b) {
      const double det = lines[a].alpha * lines[b].beta - lines[b].alpha * lines[a].beta;
      if (std::abs(det) < 1e-12) continue;
      const double wa =
          (lines[a].gamma * lines[b].beta - lines[b].gamma * lines[a].beta) / det;
      const double wb =
          (lines[a].alpha * lines[b].gamma - lines[b].alpha * lines[a].gamma) / det;
      const VectorXd w = lift(wa, wb);
      if (!feasible(w)) continue;
      VectorXd wc = w.cwiseMax(0.0).cwiseMin(1.0);
      best = std::min(best, es_at(wc));
    }
  }
  return best;
}

}  // namespace c7

Outcome criterion7() {
  const auto t0 = std::chrono::steady_clock::now();
  rng::Engine rng(700);
  double worst_gap = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 1 + static_cast<int>(rng.below(3));
    const int N = 4 + static_cast<int>(rng.below(13));
    portfolio::PortfolioInstance inst;
    inst.defaults.resize(N, n);
    for (int j = 0; j < N; ++j) {
      for (int i = 0; i < n; ++i) {
        inst.defaults(j, i) = rng.uniform() < 0.4 ? 1.0 : 0.0;
      }
    }
    inst.prices = VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) inst.prices[i] = rng.uniform(0.15, 0.7);
    inst.horizons = VectorXd::Constant(n, 1.0);
    inst.alpha = rng.uniform(0.55, 0.95);
    inst.budget = rng.uniform(0.2, 0.8) * inst.prices.sum();
    const double reference = c7::oracle(inst);
    const portfolio::CvarSolution sol = portfolio::optimize_cvar(inst);
    worst_gap = std::max(worst_gap, std::abs(sol.objective - reference));
  }

  // Expected shortfall against its dual-form oracle.
  double worst_dual = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 5 + static_cast<int>(rng.below(40));
    VectorXd l(n);
    for (int i = 0; i < n; ++i) l[i] = rng.uniform(-2.0, 5.0);
    const double alpha = rng.uniform(0.05, 0.95);
    auto dual = [&](double beta) {
      return beta + (l.array() - beta).cwiseMax(0.0).mean() / (1.0 - alpha);
    };
    double lo = l.minCoeff(), hi = l.maxCoeff();
    for (int it = 0; it < 300; ++it) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      if (dual(m1) < dual(m2)) {
        hi = m2;
      } else {
        lo = m1;
      }
    }
    const double oracle_es = dual(0.5 * (lo + hi));
    worst_dual =
        std::max(worst_dual, std::abs(portfolio::expected_shortfall(l, alpha) - oracle_es));
  }

  const double elapsed = seconds_since(t0);
  Outcome out;
  out.pass = worst_gap < 1e-3 && worst_dual < 1e-9 && elapsed < 60.0;
  out.detail = fmt("worst optimizer-vs-oracle gap %.2e (< 1e-3), worst ES dual gap %.2e (< 1e-9), %.1fs (< 60s)",
                   worst_gap, worst_dual, elapsed);
  return out;
}

// ---------------------------------------------------------------------------
// 8. Credit experiment: the flow portfolio realizes a strictly lower expected
// shortfall than the per-class Weibull portfolio in at least 8 of 10 seeds.
Outcome criterion8() {
  const auto t0 = std::chrono::steady_clock::now();
  dyn::DynamicsConfig mcfg;
  mcfg.basis_count = 6;
  mcfg.pi_width = 8;
  mcfg.pi_depth = 2;
  mcfg.sigma_width = 4;
  mcfg.sigma_depth = 2;
  mcfg.g_width = 8;
  mcfg.g_depth = 2;

  train::TrainConfig tcfg;
  tcfg.learning_rate = 0.012;
  tcfg.batch_size = 512;
  tcfg.max_epochs = 60;
  tcfg.patience = 15;

  io::PortfolioConfig pcfg;
  pcfg.classes = 10;
  pcfg.entities_per_class = 20;
  pcfg.obs_per_entity = 15;
  pcfg.alpha = 0.95;
  pcfg.budget_fraction = 0.25;
  pcfg.horizon_quantile = 0.5;
  pcfg.pricing_scenarios = 30000;
  pcfg.optimization_scenarios = 3000;
  pcfg.realization_scenarios = 30000;

  int wins = 0;
  std::string per_seed;
  for (int rep = 0; rep < 10; ++rep) {
    pcfg.seed = 800 + static_cast<std::uint64_t>(rep);
    tcfg.seed = 810 + static_cast<std::uint64_t>(rep);
    const pipeline::PortfolioRun run =
        pipeline::run_portfolio_experiment(pcfg, mcfg, 820 + rep, tcfg);
    const bool win = run.report.realized_es_flow < run.report.realized_es_weibull;
    wins += win ? 1 : 0;
    per_seed += fmt("%s%.3f/%.3f", rep ? " " : "", run.report.realized_es_flow,
                    run.report.realized_es_weibull);
  }
  const double elapsed = seconds_since(t0);
  Outcome out;
  out.pass = wins >= 8 && elapsed < 1800.0;
  out.detail = fmt("flow beat the per-class Weibull in %d/10 repetitions (need >= 8) [flow/weibull realized ES: %s], %.0fs (< 1800s)",
                   wins, per_seed.c_str(), elapsed);
  return out;
}

// ---------------------------------------------------------------------------
// 9. Real-data concordance; runs only when the user supplies the file.
Outcome criterion9() {
  const auto t0 = std::chrono::steady_clock::now();
  const char* path = std::getenv("SURVFLOW_WHAS_CSV");
  Outcome out;
  if (path == nullptr || std::string(path).empty()) {
    out.skipped = true;
    out.detail =
        "set SURVFLOW_WHAS_CSV to a WHAS-format CSV (columns time,event,...) to run "
        "this criterion; reported as unavailable";
    return out;
  }
  const data::Dataset ds = data::load_csv(path);
  dyn::DynamicsConfig mcfg;  // the WHAS hyperparameter row
  mcfg.basis_count = 32;
  mcfg.pi_width = 12;
  mcfg.pi_depth = 4;
  mcfg.sigma_width = 8;
  mcfg.sigma_depth = 4;
  mcfg.g_width = 12;
  mcfg.g_depth = 3;
  train::TrainConfig tcfg;
  tcfg.learning_rate = 0.01;
  tcfg.batch_size = 256;
  tcfg.max_epochs = 200;
  tcfg.patience = 25;
  tcfg.seed = 901;
  const pipeline::TrainedModel trained =
      pipeline::train_on_dataset(ds, mcfg, 902, tcfg, 0.65, 0.15);
  rng::Engine split_rng(rng::derive(tcfg.seed, 23));
  const data::SplitResult parts = data::split(ds, 0.65, 0.15, split_rng);
  io::EvalConfig ecfg;
  ecfg.risk_samples = 64;
  ecfg.seed = 903;
  ecfg.solver = odeint::SolverConfig::training(16);
  const pipeline::EvalReport report =
      pipeline::evaluate_model(trained.model, trained.standardizer, parts.test, ecfg);
  const double elapsed = seconds_since(t0);
  out.pass = std::abs(report.concordance - 0.86059) < 0.05;
  out.detail = fmt("WHAS-format concordance %.4f vs published 0.86059 (|diff| < 0.05), %.0fs",
                   report.concordance, elapsed);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only = std::atoi(argv[i + 1]);
    }
  }
  const std::vector<std::function<Outcome()>> criteria{
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9};

  int failures = 0;
  bool any_skip = false;
  for (int c = 1; c <= 9; ++c) {
    if (only != 0 && c != only) continue;
    const Outcome out = criteria[static_cast<std::size_t>(c - 1)]();
    const char* verdict = out.skipped ? "SKIP" : (out.pass ? "PASS" : "FAIL");
    std::printf("%s criterion %d: %s\n", verdict, c, out.detail.c_str());
    std::fflush(stdout);
    if (out.skipped) {
      any_skip = true;
    } else if (!out.pass) {
      ++failures;
    }
  }
  if (failures > 0) return 1;
  if (any_skip && only != 0) return 77;
  return 0;
}
