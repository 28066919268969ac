#include "survflow/odeint.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace survflow::odeint {

namespace {

// Tsitouras 5(4) coefficients (Computers & Mathematics with Applications 62).
constexpr double t_c2 = 0.161;
constexpr double t_c3 = 0.327;
constexpr double t_c4 = 0.9;
constexpr double t_c5 = 0.9800255409045097;

constexpr double t_a21 = 0.161;
constexpr double t_a31 = -0.008480655492356989;
constexpr double t_a32 = 0.335480655492357;
constexpr double t_a41 = 2.8971530571054935;
constexpr double t_a42 = -6.359448489975075;
constexpr double t_a43 = 4.3622954328695815;
constexpr double t_a51 = 5.325864828439257;
constexpr double t_a52 = -11.748883564062828;
constexpr double t_a53 = 7.4955393428898365;
constexpr double t_a54 = -0.09249506636175525;
constexpr double t_a61 = 5.86145544294642;
constexpr double t_a62 = -12.92096931784711;
constexpr double t_a63 = 8.159367898576159;
constexpr double t_a64 = -0.071584973281401;
constexpr double t_a65 = -0.028269050394068383;

constexpr double t_b1 = 0.09646076681806523;
constexpr double t_b2 = 0.01;
constexpr double t_b3 = 0.4798896504144996;
constexpr double t_b4 = 1.379008574103742;
constexpr double t_b5 = -3.290069515436081;
constexpr double t_b6 = 2.324710524099774;

// Error weights b - bhat (last stage is the FSAL evaluation at the new point).
constexpr double t_e1 = -0.001780011052226;
constexpr double t_e2 = -0.000816434459657;
constexpr double t_e3 = 0.007880878010262;
constexpr double t_e4 = -0.144711007173263;
constexpr double t_e5 = 0.582357165452555;
constexpr double t_e6 = -0.458082105929187;
constexpr double t_e7 = 0.015151515151515152;

// Bogacki-Shampine 3(2) coefficients.
constexpr double b_b1 = 2.0 / 9.0;
constexpr double b_b2 = 1.0 / 3.0;
constexpr double b_b3 = 4.0 / 9.0;
constexpr double b_e1 = 2.0 / 9.0 - 7.0 / 24.0;
constexpr double b_e2 = 1.0 / 3.0 - 1.0 / 4.0;
constexpr double b_e3 = 4.0 / 9.0 - 1.0 / 3.0;
constexpr double b_e4 = -1.0 / 8.0;

struct AdaptiveTableau {
  int order;       // order of the propagated solution
  int err_order;   // order in h of the local error estimate
};

constexpr AdaptiveTableau kTsit{5, 5};
constexpr AdaptiveTableau kBs{3, 3};

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

void eval_checked(const Field& field, double t, const Eigen::VectorXd& y,
                  Eigen::VectorXd& dy) {
  field(t, y, dy);
  if (!all_finite(dy)) {
    throw NonFiniteError("odeint: vector field returned a non-finite derivative at t=" +
                         std::to_string(t));
  }
}

// One Tsit5 step from (t, y) with step h. k1 holds f(t, y) on entry; on exit
// k7 holds f(t + h, y_new) (FSAL). Fills y_new and err.
void tsit5_step(const Field& f, double t, const Eigen::VectorXd& y, double h,
                Eigen::VectorXd& k1, Eigen::VectorXd& k2, Eigen::VectorXd& k3,
                Eigen::VectorXd& k4, Eigen::VectorXd& k5, Eigen::VectorXd& k6,
                Eigen::VectorXd& k7, Eigen::VectorXd& y_new, Eigen::VectorXd& err,
                Eigen::VectorXd& tmp) {
  tmp = y + h * (t_a21 * k1);
  eval_checked(f, t + t_c2 * h, tmp, k2);
  tmp = y + h * (t_a31 * k1 + t_a32 * k2);
  eval_checked(f, t + t_c3 * h, tmp, k3);
  tmp = y + h * (t_a41 * k1 + t_a42 * k2 + t_a43 * k3);
  eval_checked(f, t + t_c4 * h, tmp, k4);
  tmp = y + h * (t_a51 * k1 + t_a52 * k2 + t_a53 * k3 + t_a54 * k4);
  eval_checked(f, t + t_c5 * h, tmp, k5);
  tmp = y + h * (t_a61 * k1 + t_a62 * k2 + t_a63 * k3 + t_a64 * k4 + t_a65 * k5);
  eval_checked(f, t + h, tmp, k6);
  y_new = y + h * (t_b1 * k1 + t_b2 * k2 + t_b3 * k3 + t_b4 * k4 + t_b5 * k5 + t_b6 * k6);
  eval_checked(f, t + h, y_new, k7);
  err = h * (t_e1 * k1 + t_e2 * k2 + t_e3 * k3 + t_e4 * k4 + t_e5 * k5 + t_e6 * k6 +
             t_e7 * k7);
}

// One Bogacki-Shampine step; k1 = f(t, y) on entry, k4 = f(t+h, y_new) on exit.
void bs32_step(const Field& f, double t, const Eigen::VectorXd& y, double h,
               Eigen::VectorXd& k1, Eigen::VectorXd& k2, Eigen::VectorXd& k3,
               Eigen::VectorXd& k4, Eigen::VectorXd& y_new, Eigen::VectorXd& err,
               Eigen::VectorXd& tmp) {
  tmp = y + h * (0.5 * k1);
  eval_checked(f, t + 0.5 * h, tmp, k2);
  tmp = y + h * (0.75 * k2);
  eval_checked(f, t + 0.75 * h, tmp, k3);
  y_new = y + h * (b_b1 * k1 + b_b2 * k2 + b_b3 * k3);
  eval_checked(f, t + h, y_new, k4);
  err = h * (b_e1 * k1 + b_e2 * k2 + b_e3 * k3 + b_e4 * k4);
}

double error_norm(const Eigen::VectorXd& err, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& y_new, double atol, double rtol) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double scale = atol + rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
    const double r = err[i] / scale;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

// Hairer's starting-step heuristic.
double initial_step(const Field& f, double t0, const Eigen::VectorXd& y0,
                    const Eigen::VectorXd& f0, double direction, double span,
                    double atol, double rtol, int order) {
  auto scaled_norm = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& ref) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double scale = atol + rtol * std::abs(ref[i]);
      const double r = v[i] / scale;
      acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(v.size()));
  };
  const double d0 = scaled_norm(y0, y0);
  const double d1 = scaled_norm(f0, y0);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, span);

  Eigen::VectorXd y1 = y0 + direction * h0 * f0;
  Eigen::VectorXd f1(y0.size());
  eval_checked(f, t0 + direction * h0, y1, f1);
  const double d2 = scaled_norm(f1 - f0, y0) / h0;

  double h1;
  if (std::max(d1, d2) <= 1e-15) {
    h1 = std::max(1e-6, h0 * 1e-3);
  } else {
    h1 = std::pow(0.01 / std::max(d1, d2), 1.0 / (order + 1));
  }
  return std::min({100.0 * h0, h1, span});
}

IvpState integrate_adaptive(const Field& field, const IvpState& state0, double t0,
                            double t1, const SolverConfig& cfg,
                            const AdaptiveTableau& tab) {
  const Eigen::Index n = state0.components.size();
  const double direction = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);

  Eigen::VectorXd y = state0.components;
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  Eigen::VectorXd y_new(n), err(n), tmp(n);

  if (!all_finite(y)) throw NonFiniteError("odeint: non-finite initial state");
  eval_checked(field, t0, y, k1);

  double t = t0;
  double h = initial_step(field, t0, y, k1, direction, span, cfg.atol, cfg.rtol,
                          tab.order);

  // PI controller constants; safety 0.9, step factor clamped to [0.2, 5].
  const double beta = 0.4 / tab.err_order;
  const double alpha = 1.0 / tab.err_order - 0.75 * beta;
  const double safety = 0.9;
  double err_prev = 1e-4;

  int steps = 0;
  bool last = false;
  while (true) {
    if (std::abs(t - t1) <= 1e-14 * std::max(1.0, std::abs(t1))) break;
    if (++steps > cfg.max_steps) {
      throw StepLimitError("odeint: exceeded max_steps=" + std::to_string(cfg.max_steps));
    }
    const double remaining = std::abs(t1 - t);
    if (h >= remaining) {
      h = remaining;
      last = true;
    } else {
      last = false;
    }
    const double hs = direction * h;

    if (tab.order == 5) {
      tsit5_step(field, t, y, hs, k1, k2, k3, k4, k5, k6, k7, y_new, err, tmp);
    } else {
      bs32_step(field, t, y, hs, k1, k2, k3, k4, y_new, err, tmp);
    }

    const double en = error_norm(err, y, y_new, cfg.atol, cfg.rtol);
    if (std::isfinite(en) && en <= 1.0) {
      t = last ? t1 : t + hs;
      y.swap(y_new);
      k1 = (tab.order == 5) ? k7 : k4;  // FSAL
      const double fac = safety * std::pow(std::max(en, 1e-12), -alpha) *
                         std::pow(err_prev, beta);
      h *= std::clamp(fac, 0.2, 5.0);
      err_prev = std::max(en, 1e-4);
    } else if (!std::isfinite(en)) {
      h *= 0.2;
      if (h < 1e-14 * std::max(1.0, std::abs(t))) {
        throw NonFiniteError("odeint: step size collapsed under non-finite error");
      }
    } else {
      h *= std::clamp(safety * std::pow(en, -1.0 / tab.err_order), 0.2, 1.0);
    }
  }
  return IvpState{std::move(y), t1};
}

void rk4_step(const Field& f, double t, double h, Eigen::VectorXd& y,
              Eigen::VectorXd& k1, Eigen::VectorXd& k2, Eigen::VectorXd& k3,
              Eigen::VectorXd& k4, Eigen::VectorXd& tmp) {
  eval_checked(f, t, y, k1);
  tmp = y + (h / 2) * k1;
  eval_checked(f, t + h / 2, tmp, k2);
  tmp = y + (h / 2) * k2;
  eval_checked(f, t + h / 2, tmp, k3);
  tmp = y + h * k3;
  eval_checked(f, t + h, tmp, k4);
  y += (h / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

void validate(const SolverConfig& cfg) {
  if (!(cfg.rtol > 0.0)) throw DomainError("SolverConfig: rtol must be > 0");
  if (!(cfg.atol > 0.0)) throw DomainError("SolverConfig: atol must be > 0");
  if (cfg.fixed_steps < 1) throw DomainError("SolverConfig: fixed_steps must be >= 1");
  if (cfg.max_steps < 1) throw DomainError("SolverConfig: max_steps must be >= 1");
}

IvpState integrate(const Field& field, const IvpState& state0, double t0, double t1,
                   const SolverConfig& cfg) {
  validate(cfg);
  if (t0 == t1) return IvpState{state0.components, t1};

  switch (cfg.method) {
    case Method::AdaptiveRK54:
      return integrate_adaptive(field, state0, t0, t1, cfg, kTsit);
    case Method::AdaptiveRK32:
      return integrate_adaptive(field, state0, t0, t1, cfg, kBs);
    case Method::FixedRK4: {
      if (cfg.fixed_steps > cfg.max_steps) {
        throw StepLimitError("odeint: fixed_steps exceeds max_steps");
      }
      Eigen::VectorXd y =
          fixed_step_run(Method::FixedRK4, field, state0.components, t0, t1,
                         cfg.fixed_steps);
      return IvpState{std::move(y), t1};
    }
  }
  throw DomainError("odeint: unknown method");
}

Eigen::VectorXd fixed_step_run(Method method, const Field& field,
                               const Eigen::VectorXd& y0, double t0, double t1,
                               int n_steps) {
  const Eigen::Index n = y0.size();
  const double h = (t1 - t0) / n_steps;
  Eigen::VectorXd y = y0;
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  Eigen::VectorXd y_new(n), err(n), tmp(n);

  if (!all_finite(y)) throw NonFiniteError("odeint: non-finite initial state");

  for (int j = 0; j < n_steps; ++j) {
    const double t = t0 + j * h;
    switch (method) {
      case Method::FixedRK4:
        rk4_step(field, t, h, y, k1, k2, k3, k4, tmp);
        break;
      case Method::AdaptiveRK54:
        eval_checked(field, t, y, k1);
        tsit5_step(field, t, y, h, k1, k2, k3, k4, k5, k6, k7, y_new, err, tmp);
        y.swap(y_new);
        break;
      case Method::AdaptiveRK32:
        eval_checked(field, t, y, k1);
        bs32_step(field, t, y, h, k1, k2, k3, k4, y_new, err, tmp);
        y.swap(y_new);
        break;
    }
    if (!all_finite(y)) {
      throw NonFiniteError("odeint: state became non-finite at step " + std::to_string(j));
    }
  }
  return y;
}

OrderProbe order_probe(Method method, const Field& field, const Eigen::VectorXd& y0,
                       double t0, double t1, const Eigen::VectorXd& exact_t1,
                       std::span<const int> step_counts) {
  OrderProbe probe;
  std::vector<double> log_h, log_e;
  const double scale = std::max(1.0, exact_t1.cwiseAbs().maxCoeff());
  for (int n : step_counts) {
    const Eigen::VectorXd y = fixed_step_run(method, field, y0, t0, t1, n);
    const double e = (y - exact_t1).cwiseAbs().maxCoeff();
    probe.errors.push_back(e);
    if (e > 1e-14 * scale) {
      log_h.push_back(std::log(std::abs(t1 - t0) / n));
      log_e.push_back(std::log(e));
    }
  }
  if (log_h.size() < 2) {
    probe.degenerate = true;
    return probe;
  }
  // Least-squares slope of log(error) on log(h).
  const auto m = static_cast<double>(log_h.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < log_h.size(); ++i) {
    sx += log_h[i];
    sy += log_e[i];
    sxx += log_h[i] * log_h[i];
    sxy += log_h[i] * log_e[i];
  }
  probe.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return probe;
}

}  // namespace survflow::odeint
