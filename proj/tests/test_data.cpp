#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "survflow/data.hpp"
#include "survflow/metrics.hpp"

using namespace survflow;
using Eigen::VectorXd;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/survflow_test_") + name;
}

}  // namespace

TEST_CASE("weibull sampler matches the analytic CDF") {
  rng::Engine rng(1);
  const double shape = 1.7, scale = 2.2;
  const int n = 100000;
  VectorXd draws(n);
  for (int i = 0; i < n; ++i) draws[i] = data::weibull_sample(shape, scale, rng);
  const double d = metrics::ks_distance(
      draws, [&](double t) { return data::weibull_cdf(t, shape, scale); });
  CHECK(d < 1.63 / std::sqrt(static_cast<double>(n)));  // 1% critical value
}

TEST_CASE("generator exposes consistent raw event and censor times") {
  const data::SyntheticSpec spec = data::SyntheticSpec::calibrated(4, 11);
  const data::Dataset ds = data::generate_synthetic(spec, 500, 3, true);
  REQUIRE(ds.raw_t.has_value());
  REQUIRE(ds.raw_c.has_value());
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    CHECK(ds.times[i] == std::min((*ds.raw_t)[i], (*ds.raw_c)[i]));
    CHECK(ds.events[i] == ((*ds.raw_t)[i] <= (*ds.raw_c)[i] ? 1 : 0));
  }
}

TEST_CASE("single-component spec matches the Weibull mean on a covariate slice") {
  data::SyntheticSpec spec = data::SyntheticSpec::calibrated(2, 12);
  spec.mixture_p = 1.0;  // component one only
  const data::Dataset ds = data::generate_synthetic(spec, 200000, 4, true);
  // Conditional slice by rejection around x0.
  const VectorXd x0 = VectorXd::Constant(2, 0.5);
  double sum = 0.0, sumsq = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    if ((ds.X.col(i) - x0).cwiseAbs().maxCoeff() < 0.05) {
      const double t = (*ds.raw_t)[i];
      sum += t;
      sumsq += t * t;
      ++count;
    }
  }
  REQUIRE(count > 500);
  const double mean = sum / count;
  const double sd = std::sqrt(sumsq / count - mean * mean);
  const double expect = data::weibull_mean(spec.beta[0].dot(x0), spec.beta[1].dot(x0));
  // 3 standard errors plus slack for the finite slice width
  CHECK(std::abs(mean - expect) < 3.0 * sd / std::sqrt(static_cast<double>(count)) + 0.05 * expect);
}

TEST_CASE("calibration lands the censoring rate in the 78-82 percent band") {
  const data::SyntheticSpec spec = data::SyntheticSpec::calibrated(10, 21, 0.8);
  const data::Dataset ds = data::generate_synthetic(spec, 3000, 5);
  CHECK(ds.censoring_rate() > 0.78);
  CHECK(ds.censoring_rate() < 0.82);
}

TEST_CASE("generation is reproducible from the seed") {
  const data::SyntheticSpec spec = data::SyntheticSpec::calibrated(3, 31);
  const data::Dataset a = data::generate_synthetic(spec, 50, 6);
  const data::Dataset b = data::generate_synthetic(spec, 50, 6);
  CHECK(a.times == b.times);
  CHECK(a.X == b.X);
}

TEST_CASE("portfolio covariates have the prescribed cluster geometry") {
  const data::PortfolioCovariates pc = data::generate_portfolio_covariates(10, 200, 17);
  CHECK(pc.X.rows() == 10);
  CHECK(pc.X.cols() == 200);
  // balanced classes
  std::vector<int> counts(10, 0);
  for (int k : pc.classes) counts[static_cast<std::size_t>(k)]++;
  for (int c : counts) CHECK(c == 20);
  // within-class std near 0.1 per coordinate
  double acc = 0.0;
  int terms = 0;
  for (int k = 0; k < 10; ++k) {
    for (int j = 0; j < 10; ++j) {
      double m = 0.0, m2 = 0.0;
      for (int i = 0; i < 200; ++i) {
        if (pc.classes[static_cast<std::size_t>(i)] != k) continue;
        m += pc.X(j, i);
        m2 += pc.X(j, i) * pc.X(j, i);
      }
      m /= 20.0;
      acc += std::sqrt(std::max(m2 / 20.0 - m * m, 0.0));
      ++terms;
    }
  }
  const double mean_sd = acc / terms;
  CHECK(mean_sd > 0.08);
  CHECK(mean_sd < 0.12);
  // centers spread like U[0,1]: variance near 1/12
  const double var =
      (pc.class_centers.array() - pc.class_centers.mean()).square().mean();
  CHECK(var > 1.0 / 12.0 - 0.035);
  CHECK(var < 1.0 / 12.0 + 0.035);
  // determinism
  const data::PortfolioCovariates pc2 = data::generate_portfolio_covariates(10, 200, 17);
  CHECK(pc.X == pc2.X);
}

TEST_CASE("csv loader parses a handcrafted file exactly") {
  const std::string path = temp_path("hand.csv");
  {
    std::ofstream out(path);
    out << "time,event,age,size\n";
    out << "1.5,1,63,2.25\n";
    out << "0.25,0,41,1\n";
    out << "10,1,55,0.5\n";
  }
  const data::Dataset ds = data::load_csv(path);
  CHECK(ds.size() == 3);
  CHECK(ds.dim() == 2);
  CHECK(ds.feature_names == std::vector<std::string>{"age", "size"});
  CHECK(ds.times[0] == 1.5);
  CHECK(ds.times[1] == 0.25);
  CHECK(ds.events[0] == 1);
  CHECK(ds.events[1] == 0);
  CHECK(ds.X(0, 2) == 55.0);
  CHECK(ds.X(1, 2) == 0.5);
}

TEST_CASE("csv loader rejects malformed files") {
  const std::string path = temp_path("bad.csv");
  {
    std::ofstream out(path);
    out << "time,event,x\n1.0,2,0.5\n";
  }
  CHECK_THROWS_AS(data::load_csv(path), ParseError);
  {
    std::ofstream out(path);
    out << "time,event,x\n-1.0,1,0.5\n";
  }
  CHECK_THROWS_AS(data::load_csv(path), NonPositiveTimeError);
  {
    std::ofstream out(path);
    out << "time,x\n1.0,0.5\n";
  }
  CHECK_THROWS_AS(data::load_csv(path), MissingColumnError);
  {
    std::ofstream out(path);
    out << "time,event,x\n1.0,1,abc\n";
  }
  CHECK_THROWS_AS(data::load_csv(path), ParseError);
}

TEST_CASE("csv round trip preserves numeric content bit for bit") {
  const data::SyntheticSpec spec = data::SyntheticSpec::calibrated(5, 41);
  const data::Dataset ds = data::generate_synthetic(spec, 200, 7, true);
  const std::string path = temp_path("roundtrip.csv");
  data::write_csv(ds, path);
  const data::Dataset back = data::load_csv(path);
  CHECK(back.size() == ds.size());
  CHECK(back.times == ds.times);
  CHECK(back.X == ds.X);
  CHECK(back.events == ds.events);
  REQUIRE(back.raw_t.has_value());
  CHECK(*back.raw_t == *ds.raw_t);
  CHECK(*back.raw_c == *ds.raw_c);
}

TEST_CASE("split is stratified, disjoint and reproducible") {
  const data::SyntheticSpec spec = data::SyntheticSpec::calibrated(3, 51);
  const data::Dataset ds = data::generate_synthetic(spec, 2000, 8);
  rng::Engine rng(9);
  const data::SplitResult parts = data::split(ds, 0.7, 0.15, rng);
  CHECK(parts.train.size() + parts.validation.size() + parts.test.size() == ds.size());
  CHECK(std::abs(parts.train.censoring_rate() - ds.censoring_rate()) < 0.02);
  CHECK(std::abs(parts.test.censoring_rate() - ds.censoring_rate()) < 0.02);
  rng::Engine rng2(9);
  const data::SplitResult again = data::split(ds, 0.7, 0.15, rng2);
  CHECK(again.train.times == parts.train.times);
}

TEST_CASE("split can leave the test set empty") {
  const data::SyntheticSpec spec = data::SyntheticSpec::calibrated(2, 61);
  const data::Dataset ds = data::generate_synthetic(spec, 100, 10);
  rng::Engine rng(3);
  const data::SplitResult parts = data::split(ds, 0.8, 0.2, rng);
  CHECK(parts.test.size() == 0);
  CHECK(parts.train.size() + parts.validation.size() == 100);
}

TEST_CASE("standardizer centers and scales using its fit statistics") {
  const data::SyntheticSpec spec = data::SyntheticSpec::calibrated(4, 71);
  const data::Dataset ds = data::generate_synthetic(spec, 500, 11);
  const data::Standardizer st = data::Standardizer::fit(ds.X);
  const Eigen::MatrixXd Z = st.apply(ds.X);
  for (int j = 0; j < 4; ++j) {
    CHECK(std::abs(Z.row(j).mean()) < 1e-12);
    CHECK(std::abs(Z.row(j).array().square().mean() - 1.0) < 1e-10);
  }
}

TEST_CASE("invalid specs are rejected") {
  data::SyntheticSpec spec = data::SyntheticSpec::calibrated(2, 81);
  spec.beta[0][0] = -1.0;
  CHECK_THROWS_AS(data::validate(spec), InvalidSpecError);
  rng::Engine rng(1);
  VectorXd x_bad = VectorXd::Constant(2, -5.0);
  data::SyntheticSpec ok = data::SyntheticSpec::calibrated(2, 82);
  CHECK_THROWS_AS(data::draw_event_censor(ok, x_bad, rng), InvalidSpecError);
}
