#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>

#include "survflow/odeint.hpp"
#include "survflow/rng.hpp"

using namespace survflow;
using Eigen::VectorXd;

namespace {

odeint::Field exponential_field() {
  return [](double, const VectorXd& y, VectorXd& dy) { dy = y; };
}

odeint::Field zero_field() {
  return [](double, const VectorXd&, VectorXd& dy) { dy.setZero(); };
}

VectorXd scalar(double v) {
  VectorXd y(1);
  y[0] = v;
  return y;
}

}  // namespace

TEST_CASE("constant solution is exact") {
  odeint::SolverConfig cfg;
  for (auto method : {odeint::Method::AdaptiveRK54, odeint::Method::AdaptiveRK32,
                      odeint::Method::FixedRK4}) {
    cfg.method = method;
    const odeint::IvpState out =
        odeint::integrate(zero_field(), {scalar(3.7), 0.0}, 0.0, 1.0, cfg);
    CHECK(out.components[0] == 3.7);
    CHECK(out.t == 1.0);
  }
}

TEST_CASE("exponential growth hits e") {
  odeint::SolverConfig cfg;
  cfg.rtol = 1e-8;
  cfg.atol = 1e-8;
  const odeint::IvpState out =
      odeint::integrate(exponential_field(), {scalar(1.0), 0.0}, 0.0, 1.0, cfg);
  CHECK(out.components[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-6));
}

TEST_CASE("backward integration inverts the forward map") {
  odeint::SolverConfig cfg;
  cfg.rtol = 1e-8;
  cfg.atol = 1e-8;
  const odeint::IvpState fwd =
      odeint::integrate(exponential_field(), {scalar(1.0), 0.0}, 0.0, 1.0, cfg);
  const odeint::IvpState back =
      odeint::integrate(exponential_field(), fwd, 1.0, 0.0, cfg);
  CHECK(std::abs(back.components[0] - 1.0) < 1e-6);
}

TEST_CASE("round trip stays within the tolerance budget for Lipschitz fields") {
  odeint::Field field = [](double t, const VectorXd& y, VectorXd& dy) {
    dy[0] = std::sin(y[0]) + std::cos(3.0 * t);
  };
  odeint::SolverConfig cfg;
  rng::Engine rng(5);
  for (auto method : {odeint::Method::AdaptiveRK54, odeint::Method::AdaptiveRK32}) {
    cfg.method = method;
    for (int rep = 0; rep < 20; ++rep) {
      const double z0 = rng.uniform(-3.0, 3.0);
      const odeint::IvpState fwd = odeint::integrate(field, {scalar(z0), 0.0}, 0.0, 1.0, cfg);
      const odeint::IvpState back = odeint::integrate(field, fwd, 1.0, 0.0, cfg);
      const double budget = 10.0 * (cfg.atol + cfg.rtol * std::abs(z0));
      CHECK(std::abs(back.components[0] - z0) < budget);
    }
  }
}

TEST_CASE("fixed-RK4 order probe reports slope near four") {
  const std::array<int, 4> steps{8, 16, 32, 64};
  const odeint::OrderProbe probe =
      odeint::order_probe(odeint::Method::FixedRK4, exponential_field(), scalar(1.0),
                          0.0, 1.0, scalar(std::exp(1.0)), steps);
  CHECK(!probe.degenerate);
  CHECK(std::abs(probe.slope - 4.0) < 0.3);
}

TEST_CASE("Tsitouras pair at fixed steps has fifth-order slope") {
  const std::array<int, 4> steps{8, 16, 32, 64};
  const odeint::OrderProbe probe =
      odeint::order_probe(odeint::Method::AdaptiveRK54, exponential_field(), scalar(1.0),
                          0.0, 1.0, scalar(std::exp(1.0)), steps);
  CHECK(!probe.degenerate);
  CHECK(std::abs(probe.slope - 5.0) < 0.5);
}

TEST_CASE("order probe on the zero field reports degenerate") {
  const std::array<int, 3> steps{8, 16, 32};
  const odeint::OrderProbe probe =
      odeint::order_probe(odeint::Method::FixedRK4, zero_field(), scalar(2.0), 0.0,
                          1.0, scalar(2.0), steps);
  CHECK(probe.degenerate);
}

TEST_CASE("halving the step keeps at least second order on smooth fields") {
  odeint::Field field = [](double t, const VectorXd& y, VectorXd& dy) {
    dy[0] = std::sin(y[0]) + std::cos(3.0 * t);
  };
  odeint::SolverConfig tight;
  tight.rtol = 1e-12;
  tight.atol = 1e-12;
  const VectorXd ref =
      odeint::integrate(field, {scalar(0.4), 0.0}, 0.0, 1.0, tight).components;
  const std::array<int, 4> steps{8, 16, 32, 64};
  const odeint::OrderProbe probe = odeint::order_probe(
      odeint::Method::FixedRK4, field, scalar(0.4), 0.0, 1.0, ref, steps);
  CHECK(!probe.degenerate);
  CHECK(probe.slope >= 2.0);
}

TEST_CASE("output is bitwise deterministic") {
  odeint::Field field = [](double t, const VectorXd& y, VectorXd& dy) {
    dy[0] = std::sin(y[0] * 1.3) + t;
  };
  odeint::SolverConfig cfg;
  const auto a = odeint::integrate(field, {scalar(0.3), 0.0}, 0.0, 1.0, cfg);
  const auto b = odeint::integrate(field, {scalar(0.3), 0.0}, 0.0, 1.0, cfg);
  CHECK(a.components[0] == b.components[0]);
}

TEST_CASE("step limit raises StepLimitError") {
  odeint::SolverConfig cfg;
  cfg.max_steps = 3;
  cfg.rtol = 1e-13;
  cfg.atol = 1e-13;
  CHECK_THROWS_AS(
      odeint::integrate(exponential_field(), {scalar(1.0), 0.0}, 0.0, 1.0, cfg),
      StepLimitError);
}

TEST_CASE("non-finite fields raise NonFiniteError") {
  odeint::Field field = [](double, const VectorXd& y, VectorXd& dy) {
    dy[0] = std::sqrt(y[0] - 10.0);  // NaN for y < 10
  };
  odeint::SolverConfig cfg;
  CHECK_THROWS_AS(odeint::integrate(field, {scalar(1.0), 0.0}, 0.0, 1.0, cfg),
                  NonFiniteError);
}

TEST_CASE("config validation rejects bad tolerances") {
  odeint::SolverConfig cfg;
  cfg.rtol = 0.0;
  CHECK_THROWS_AS(odeint::integrate(zero_field(), {scalar(0.0), 0.0}, 0.0, 1.0, cfg),
                  DomainError);
  cfg = {};
  cfg.fixed_steps = 0;
  CHECK_THROWS_AS(odeint::integrate(zero_field(), {scalar(0.0), 0.0}, 0.0, 1.0, cfg),
                  DomainError);
}
