#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "survflow/dynamics.hpp"
#include "test_util.hpp"

using namespace survflow;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("K=1 reduces the drift to the single basis function") {
  dyn::DynamicsConfig cfg;
  cfg.covariate_dim = 2;
  cfg.basis_count = 1;
  cfg.g_width = 4;
  cfg.g_depth = 1;
  dyn::FlowModel model = dyn::init_model(cfg, 3);
  const VectorXd x = VectorXd::Random(2);
  for (double z : {-1.0, 0.0, 0.7}) {
    MatrixXd zin(1, 1);
    zin(0, 0) = z;
    const double g1 = net::forward(model.g[0], zin)(0, 0);
    CHECK(dyn::drift(model, z, 0.3, x) == doctest::Approx(g1).epsilon(1e-15));
  }
}

TEST_CASE("shared-gate drift ignores covariates before the gate time") {
  dyn::DynamicsConfig cfg;
  cfg.covariate_dim = 3;
  cfg.basis_count = 2;
  cfg.mode = dyn::HierarchyMode::SharedGate;
  cfg.gate_time = 0.5;
  dyn::FlowModel model = dyn::init_model(cfg, 4);
  rng::Engine rng(9);
  for (int rep = 0; rep < 10; ++rep) {
    VectorXd x1(3), x2(3);
    for (int j = 0; j < 3; ++j) {
      x1[j] = rng.uniform(-2.0, 2.0);
      x2[j] = rng.uniform(-2.0, 2.0);
    }
    const double a = dyn::drift(model, 0.4, 0.3, x1);
    const double b = dyn::drift(model, 0.4, 0.3, x2);
    CHECK(a == b);  // bitwise: the covariate gate is never evaluated
    const double c = dyn::drift(model, 0.4, 0.7, x1);
    const double d = dyn::drift(model, 0.4, 0.7, x2);
    CHECK(c != d);
  }
}

TEST_CASE("K=2 drift equals the hand-computed mixture") {
  dyn::DynamicsConfig cfg;
  cfg.covariate_dim = 1;
  cfg.basis_count = 2;
  cfg.pi_depth = 0;  // affine softmax gates for a closed-form check
  cfg.sigma_depth = 0;
  cfg.g_depth = 0;
  dyn::FlowModel model = dyn::init_model(cfg, 5);
  // pi logits = [0.3 x, -0.1 x]; sigma logits = [0.2 t, 0.5 t];
  // g1(z) = 2z + 1, g2(z) = -z + 0.5.
  model.pi[0].weights[0] << 0.3, -0.1;
  model.pi[0].biases[0].setZero();
  model.sigma[0].weights[0] << 0.2, 0.5;
  model.sigma[0].biases[0].setZero();
  model.g[0].weights[0](0, 0) = 2.0;
  model.g[0].biases[0][0] = 1.0;
  model.g[1].weights[0](0, 0) = -1.0;
  model.g[1].biases[0][0] = 0.5;

  const double x = 0.8, t = 0.6, z = -0.4;
  const double p1 = std::exp(0.3 * x) / (std::exp(0.3 * x) + std::exp(-0.1 * x));
  const double s1 = std::exp(0.2 * t) / (std::exp(0.2 * t) + std::exp(0.5 * t));
  const double expect =
      p1 * s1 * (2.0 * z + 1.0) + (1.0 - p1) * (1.0 - s1) * (-z + 0.5);
  VectorXd xv(1);
  xv[0] = x;
  CHECK(dyn::drift(model, z, t, xv) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("affine basis functions give a closed-form divergence") {
  dyn::DynamicsConfig cfg;
  cfg.covariate_dim = 2;
  cfg.basis_count = 2;
  cfg.g_depth = 0;
  dyn::FlowModel model = dyn::init_model(cfg, 6);
  model.g[0].weights[0](0, 0) = 1.5;
  model.g[1].weights[0](0, 0) = -0.7;
  const VectorXd x = VectorXd::Random(2);
  const double t = 0.4;
  const VectorXd w = dyn::gate_weights(model, x, t);
  const double expect = w[0] * 1.5 + w[1] * (-0.7);
  CHECK(dyn::drift_divergence(model, 0.3, t, x) ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("divergence matches finite differences on random models") {
  for (int rep = 0; rep < 100; ++rep) {
    const dyn::FlowModel model = testutil::random_model(1000 + rep);
    rng::Engine rng(rep);
    VectorXd x(model.cfg.covariate_dim);
    for (int j = 0; j < x.size(); ++j) x[j] = rng.uniform(-1.0, 1.0);
    const double z = rng.uniform(-2.0, 2.0);
    const double t = rng.uniform(0.0, 1.0);
    const double fd = testutil::central_diff(
        [&](double zz) { return dyn::drift(model, zz, t, x); }, z);
    const double exact = dyn::drift_divergence(model, z, t, x);
    CHECK(std::abs(exact - fd) < 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("constant basis functions have zero divergence") {
  const dyn::FlowModel model = testutil::constant_drift_model(2.5);
  const VectorXd x = VectorXd::Random(2);
  CHECK(dyn::drift_divergence(model, 0.9, 0.2, x) == 0.0);
}

TEST_CASE("discrete gating activates exactly one level") {
  dyn::DynamicsConfig cfg;
  cfg.covariate_dim = 2;
  cfg.basis_count = 2;
  cfg.levels = 2;
  cfg.mode = dyn::HierarchyMode::Discrete;
  cfg.breakpoints = {0.5, 1.0};
  dyn::FlowModel model = dyn::init_model(cfg, 8);
  const VectorXd x = VectorXd::Random(2);
  const VectorXd w_lo = dyn::gate_weights(model, x, 0.3);
  CHECK(w_lo.segment(0, 2).minCoeff() > 0.0);
  CHECK(w_lo.segment(2, 2).isZero(0.0));
  const VectorXd w_hi = dyn::gate_weights(model, x, 0.7);
  CHECK(w_hi.segment(0, 2).isZero(0.0));
  CHECK(w_hi.segment(2, 2).minCoeff() > 0.0);
}

TEST_CASE("continuous envelope is one at its center") {
  dyn::DynamicsConfig cfg;
  cfg.covariate_dim = 1;
  cfg.basis_count = 1;
  cfg.levels = 2;
  cfg.mode = dyn::HierarchyMode::Continuous;
  cfg.centers = {0.25, 0.75};
  cfg.widths = {4.0, 4.0};
  const dyn::FlowModel model = dyn::init_model(cfg, 9);
  const VectorXd env = dyn::envelope_at(model, 0.25);
  CHECK(env[0] == 1.0);
  CHECK(env[1] < 1.0);
}

TEST_CASE("large widths collapse the continuous gate to the discrete one") {
  // With breakpoints at the centers, the two modes agree on the center grid
  // as the envelopes sharpen.
  dyn::DynamicsConfig ccfg;
  ccfg.covariate_dim = 2;
  ccfg.basis_count = 2;
  ccfg.levels = 2;
  ccfg.mode = dyn::HierarchyMode::Continuous;
  ccfg.centers = {0.25, 1.0};
  ccfg.widths = {1e6, 1e6};
  dyn::FlowModel cont = dyn::init_model(ccfg, 10);

  dyn::DynamicsConfig dcfg = ccfg;
  dcfg.mode = dyn::HierarchyMode::Discrete;
  dcfg.breakpoints = {0.25, 1.0};
  dcfg.centers.clear();
  dcfg.widths.clear();
  dyn::FlowModel disc = dyn::init_model(dcfg, 10);  // same nets from same seed

  const VectorXd x = VectorXd::Random(2);
  for (double t : {0.25, 1.0}) {
    const VectorXd wc = dyn::gate_weights(cont, x, t);
    const VectorXd wd = dyn::gate_weights(disc, x, t);
    CHECK((wc - wd).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("softmax gates are normalized for a thousand covariates") {
  const dyn::FlowModel model = testutil::random_model(77);
  rng::Engine rng(21);
  for (int rep = 0; rep < 1000; ++rep) {
    VectorXd x(model.cfg.covariate_dim);
    for (int j = 0; j < x.size(); ++j) x[j] = rng.uniform(-3.0, 3.0);
    const MatrixXd pifac = dyn::pi_at(model, MatrixXd(x));
    for (int h = 0; h < model.cfg.levels; ++h) {
      const double sum = pifac.col(0).segment(h * model.cfg.basis_count,
                                              model.cfg.basis_count).sum();
      CHECK(std::abs(sum - 1.0) < 1e-12);
      CHECK(pifac.col(0).segment(h * model.cfg.basis_count, model.cfg.basis_count)
                .minCoeff() > 0.0);
    }
  }
}

TEST_CASE("drift stays finite and Lipschitz on a grid") {
  for (int rep = 0; rep < 10; ++rep) {
    const dyn::FlowModel model = testutil::random_model(3000 + rep);
    const VectorXd x = VectorXd::Random(model.cfg.covariate_dim);
    double max_quotient = 0.0;
    double prev_z = -6.0;
    double prev_v = dyn::drift(model, prev_z, 0.5, x);
    for (double z = -5.9; z <= 6.0; z += 0.1) {
      const double v = dyn::drift(model, z, 0.5, x);
      CHECK(std::isfinite(v));
      max_quotient = std::max(max_quotient, std::abs(v - prev_v) / (z - prev_z));
      prev_z = z;
      prev_v = v;
    }
    CHECK(max_quotient < 1e3);
  }
}

TEST_CASE("model parameters pack and unpack losslessly") {
  for (int rep = 0; rep < 8; ++rep) {
    const dyn::FlowModel model = testutil::random_model(400 + rep);
    const net::ParamVector pv = dyn::pack(model);
    CHECK(pv.values.size() == pv.layout.total());
    dyn::FlowModel other = dyn::init_model(model.cfg, 9999);
    dyn::unpack(other, pv.values);
    CHECK(dyn::pack(other).values == pv.values);
    // segment lookup works
    CHECK(pv.segment("g.0.0").size() > 0);
  }
}

TEST_CASE("config validation catches bad hierarchies") {
  dyn::DynamicsConfig cfg;
  cfg.basis_count = 0;
  CHECK_THROWS_AS(dyn::validate(cfg), DomainError);
  cfg = {};
  cfg.mode = dyn::HierarchyMode::Discrete;
  cfg.levels = 2;
  cfg.breakpoints = {0.8, 0.4};
  CHECK_THROWS_AS(dyn::validate(cfg), DomainError);
  cfg.breakpoints = {0.4, 0.8};  // last one must be 1
  CHECK_THROWS_AS(dyn::validate(cfg), DomainError);
  cfg = {};
  cfg.mode = dyn::HierarchyMode::Continuous;
  cfg.levels = 1;
  cfg.centers = {0.5};
  cfg.widths = {-1.0};
  CHECK_THROWS_AS(dyn::validate(cfg), DomainError);
}
