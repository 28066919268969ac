#include "survflow/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "survflow/errors.hpp"

namespace survflow::data {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double weibull_sample(double shape, double scale, rng::Engine& rng) {
  return scale * std::pow(-std::log(rng.uniform()), 1.0 / shape);
}

double weibull_cdf(double t, double shape, double scale) {
  if (t <= 0.0) return 0.0;
  return -std::expm1(-std::pow(t / scale, shape));
}

double weibull_log_pdf(double t, double shape, double scale) {
  if (t <= 0.0) return -std::numeric_limits<double>::infinity();
  const double r = t / scale;
  return std::log(shape / scale) + (shape - 1.0) * std::log(r) - std::pow(r, shape);
}

double weibull_mean(double shape, double scale) {
  return scale * std::tgamma(1.0 + 1.0 / shape);
}

void validate(const SyntheticSpec& spec) {
  if (spec.dim < 1) throw InvalidSpecError("SyntheticSpec: dim must be >= 1");
  if (!(spec.mixture_p >= 0.0 && spec.mixture_p <= 1.0)) {
    throw InvalidSpecError("SyntheticSpec: mixture weight outside [0, 1]");
  }
  if (spec.beta.size() != 6) throw InvalidSpecError("SyntheticSpec: need 6 beta vectors");
  for (const auto& b : spec.beta) {
    if (b.size() != spec.dim) throw InvalidSpecError("SyntheticSpec: beta dimension");
    if ((b.array() <= 0.0).any()) {
      throw InvalidSpecError("SyntheticSpec: beta entries must be positive");
    }
  }
}

std::pair<double, double> draw_event_censor(const SyntheticSpec& spec,
                                            const Eigen::VectorXd& x, rng::Engine& rng) {
  auto dot = [&](int k) {
    const double v = spec.beta[static_cast<std::size_t>(k)].dot(x);
    if (!(v > 0.0)) {
      throw InvalidSpecError("SyntheticSpec: nonpositive Weibull parameter b" +
                             std::to_string(k + 1) + ".x");
    }
    return v;
  };
  // Mixture draw first so the uniform stream has a fixed layout.
  const double u_mix = rng.uniform();
  double t;
  if (u_mix < spec.mixture_p) {
    t = weibull_sample(dot(0), dot(1), rng);
  } else {
    t = weibull_sample(2.0 * dot(2), dot(3), rng);
  }
  const double c = weibull_sample(dot(4), dot(5), rng);
  return {t, c};
}

SyntheticSpec SyntheticSpec::calibrated(int dim, std::uint64_t seed,
                                        double target_censoring) {
  SyntheticSpec spec;
  spec.dim = dim;
  spec.seed = seed;
  rng::Engine beta_rng(rng::derive(seed, 1));
  spec.beta.assign(6, VectorXd(dim));
  for (auto& b : spec.beta) {
    for (int j = 0; j < dim; ++j) b[j] = beta_rng.uniform(0.5, 1.5);
  }

  // Calibration draws with common random numbers, monotone in the C scale.
  const int n = 200000;
  rng::Engine cal_rng(rng::derive(seed, 2));
  VectorXd t_draws(n), c_unit(n), c_base(n);
  for (int i = 0; i < n; ++i) {
    VectorXd x(dim);
    for (int j = 0; j < dim; ++j) x[j] = cal_rng.uniform();
    const double u_mix = cal_rng.uniform();
    if (u_mix < spec.mixture_p) {
      t_draws[i] = weibull_sample(spec.beta[0].dot(x), spec.beta[1].dot(x), cal_rng);
    } else {
      t_draws[i] =
          weibull_sample(2.0 * spec.beta[2].dot(x), spec.beta[3].dot(x), cal_rng);
    }
    const double a_c = spec.beta[4].dot(x);
    c_unit[i] = std::pow(-std::log(cal_rng.uniform()), 1.0 / a_c);
    c_base[i] = spec.beta[5].dot(x);
  }
  auto censor_rate = [&](double s) {
    int censored = 0;
    for (int i = 0; i < n; ++i) {
      if (t_draws[i] > s * c_base[i] * c_unit[i]) ++censored;
    }
    return static_cast<double>(censored) / n;
  };
  double lo = 1e-3, hi = 1e3;  // rate decreases in s
  for (int it = 0; it < 80; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (censor_rate(mid) > target_censoring) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double s = std::sqrt(lo * hi);
  spec.beta[5] *= s;
  validate(spec);
  return spec;
}

double Dataset::censoring_rate() const {
  if (events.empty()) return 0.0;
  double c = 0.0;
  for (int e : events) c += (e == 0) ? 1.0 : 0.0;
  return c / static_cast<double>(events.size());
}

ObservedRecord Dataset::record(Eigen::Index i) const {
  return ObservedRecord{times[i], events[static_cast<std::size_t>(i)], X.col(i)};
}

std::vector<ObservedRecord> Dataset::records() const {
  std::vector<ObservedRecord> out;
  out.reserve(static_cast<std::size_t>(size()));
  for (Eigen::Index i = 0; i < size(); ++i) out.push_back(record(i));
  return out;
}

namespace {

std::vector<std::string> default_feature_names(int dim) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(dim));
  for (int j = 0; j < dim; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

Dataset observe(const SyntheticSpec& spec, const MatrixXd& X, rng::Engine& rng,
                bool debug_raw) {
  const Eigen::Index n = X.cols();
  Dataset ds;
  ds.X = X;
  ds.times.resize(n);
  ds.events.resize(static_cast<std::size_t>(n));
  ds.feature_names = default_feature_names(static_cast<int>(X.rows()));
  if (debug_raw) {
    ds.raw_t = VectorXd(n);
    ds.raw_c = VectorXd(n);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto [t, c] = draw_event_censor(spec, X.col(i), rng);
    ds.times[i] = std::min(t, c);
    ds.events[static_cast<std::size_t>(i)] = t <= c ? 1 : 0;
    if (debug_raw) {
      (*ds.raw_t)[i] = t;
      (*ds.raw_c)[i] = c;
    }
  }
  return ds;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec, int n, std::uint64_t seed,
                           bool debug_raw) {
  validate(spec);
  if (n < 1) throw InvalidSpecError("generate_synthetic: n must be >= 1");
  rng::Engine rng(rng::derive(seed, 3));
  MatrixXd X(spec.dim, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < spec.dim; ++j) X(j, i) = rng.uniform();
  }
  return observe(spec, X, rng, debug_raw);
}

Dataset generate_at_covariates(const SyntheticSpec& spec, const MatrixXd& X,
                               int obs_per_column, std::uint64_t seed, bool debug_raw) {
  validate(spec);
  if (obs_per_column < 1) {
    throw InvalidSpecError("generate_at_covariates: obs_per_column must be >= 1");
  }
  rng::Engine rng(rng::derive(seed, 4));
  MatrixXd Xrep(X.rows(), X.cols() * obs_per_column);
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    for (int r = 0; r < obs_per_column; ++r) {
      Xrep.col(c * obs_per_column + r) = X.col(c);
    }
  }
  return observe(spec, Xrep, rng, debug_raw);
}

PortfolioCovariates generate_portfolio_covariates(int n_classes, int n_entities,
                                                  std::uint64_t seed) {
  constexpr int dim = 10;
  PortfolioCovariates pc;
  rng::Engine rng(rng::derive(seed, 5));
  pc.class_centers.resize(dim, n_classes);
  for (int k = 0; k < n_classes; ++k) {
    for (int j = 0; j < dim; ++j) pc.class_centers(j, k) = rng.uniform();
  }
  pc.X.resize(dim, n_entities);
  pc.classes.resize(static_cast<std::size_t>(n_entities));
  const int per_class = n_entities / n_classes;
  for (int i = 0; i < n_entities; ++i) {
    const int k = std::min(i / per_class, n_classes - 1);
    pc.classes[static_cast<std::size_t>(i)] = k;
    for (int j = 0; j < dim; ++j) {
      pc.X(j, i) = pc.class_centers(j, k) + 0.1 * rng.normal();
    }
  }
  return pc;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, long row, long col) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError("csv: cannot parse '" + s + "' as a number", row, col);
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw ParseError("csv: empty file", 0);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_line(line);

  long time_col = -1, event_col = -1, rawt_col = -1, rawc_col = -1;
  std::vector<long> feature_cols;
  std::vector<std::string> feature_names;
  for (long c = 0; c < static_cast<long>(header.size()); ++c) {
    const std::string& name = header[static_cast<std::size_t>(c)];
    if (name == "time") {
      time_col = c;
    } else if (name == "event") {
      event_col = c;
    } else if (name == "raw_t") {
      rawt_col = c;
    } else if (name == "raw_c") {
      rawc_col = c;
    } else {
      feature_cols.push_back(c);
      feature_names.push_back(name);
    }
  }
  if (time_col < 0) throw MissingColumnError("csv: missing 'time' column");
  if (event_col < 0) throw MissingColumnError("csv: missing 'event' column");

  std::vector<double> times, rawts, rawcs;
  std::vector<int> events;
  std::vector<std::vector<double>> features;
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("csv: row has " + std::to_string(cells.size()) +
                           " cells, header has " + std::to_string(header.size()),
                       row);
    }
    const double t = parse_double(cells[static_cast<std::size_t>(time_col)], row, time_col);
    if (!(t > 0.0)) {
      throw NonPositiveTimeError("csv: nonpositive time at row " + std::to_string(row));
    }
    const double ev = parse_double(cells[static_cast<std::size_t>(event_col)], row, event_col);
    if (ev != 0.0 && ev != 1.0) {
      throw ParseError("csv: event must be 0 or 1", row, event_col);
    }
    times.push_back(t);
    events.push_back(static_cast<int>(ev));
    std::vector<double> feat;
    feat.reserve(feature_cols.size());
    for (long c : feature_cols) {
      feat.push_back(parse_double(cells[static_cast<std::size_t>(c)], row, c));
    }
    features.push_back(std::move(feat));
    if (rawt_col >= 0) {
      rawts.push_back(parse_double(cells[static_cast<std::size_t>(rawt_col)], row, rawt_col));
    }
    if (rawc_col >= 0) {
      rawcs.push_back(parse_double(cells[static_cast<std::size_t>(rawc_col)], row, rawc_col));
    }
  }

  Dataset ds;
  const auto n = static_cast<Eigen::Index>(times.size());
  const auto d = static_cast<Eigen::Index>(feature_cols.size());
  ds.X.resize(d, n);
  ds.times.resize(n);
  ds.events = std::move(events);
  ds.feature_names = std::move(feature_names);
  for (Eigen::Index i = 0; i < n; ++i) {
    ds.times[i] = times[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j) {
      ds.X(j, i) = features[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  if (rawt_col >= 0) {
    ds.raw_t = Eigen::Map<const VectorXd>(rawts.data(), static_cast<Eigen::Index>(rawts.size()));
  }
  if (rawc_col >= 0) {
    ds.raw_c = Eigen::Map<const VectorXd>(rawcs.data(), static_cast<Eigen::Index>(rawcs.size()));
  }
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("csv: cannot open '" + path + "' for writing");
  out << "time,event";
  for (const auto& name : ds.feature_names) out << "," << name;
  if (ds.raw_t) out << ",raw_t";
  if (ds.raw_c) out << ",raw_c";
  out << "\n";
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    out << format_double(ds.times[i]) << "," << ds.events[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < ds.X.rows(); ++j) {
      out << "," << format_double(ds.X(j, i));
    }
    if (ds.raw_t) out << "," << format_double((*ds.raw_t)[i]);
    if (ds.raw_c) out << "," << format_double((*ds.raw_c)[i]);
    out << "\n";
  }
}

namespace {

Dataset take(const Dataset& ds, const std::vector<int>& idx) {
  Dataset out;
  const auto n = static_cast<Eigen::Index>(idx.size());
  out.X.resize(ds.X.rows(), n);
  out.times.resize(n);
  out.events.resize(idx.size());
  out.feature_names = ds.feature_names;
  if (ds.raw_t) out.raw_t = VectorXd(n);
  if (ds.raw_c) out.raw_c = VectorXd(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index i = idx[static_cast<std::size_t>(k)];
    out.X.col(k) = ds.X.col(i);
    out.times[k] = ds.times[i];
    out.events[static_cast<std::size_t>(k)] = ds.events[static_cast<std::size_t>(i)];
    if (ds.raw_t) (*out.raw_t)[k] = (*ds.raw_t)[i];
    if (ds.raw_c) (*out.raw_c)[k] = (*ds.raw_c)[i];
  }
  return out;
}

}  // namespace

SplitResult split(const Dataset& ds, double train_fraction, double val_fraction,
                  rng::Engine& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0) || val_fraction < 0.0 ||
      train_fraction + val_fraction > 1.0) {
    throw DomainError("split: fractions must lie in (0, 1) and sum to at most 1");
  }
  // Stratify on the event indicator.
  std::vector<int> events_idx, censored_idx;
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    (ds.events[static_cast<std::size_t>(i)] ? events_idx : censored_idx)
        .push_back(static_cast<int>(i));
  }
  std::vector<int> tr, va, te;
  for (auto* stratum : {&events_idx, &censored_idx}) {
    if (stratum->empty()) continue;
    const auto perm = rng::shuffled_indices(static_cast<int>(stratum->size()), rng);
    const auto n = static_cast<double>(stratum->size());
    const auto n_tr = static_cast<std::size_t>(std::lround(train_fraction * n));
    const auto n_va = static_cast<std::size_t>(std::lround(val_fraction * n));
    for (std::size_t k = 0; k < perm.size(); ++k) {
      const int i = (*stratum)[static_cast<std::size_t>(perm[k])];
      if (k < n_tr) {
        tr.push_back(i);
      } else if (k < n_tr + n_va) {
        va.push_back(i);
      } else {
        te.push_back(i);
      }
    }
  }
  std::sort(tr.begin(), tr.end());
  std::sort(va.begin(), va.end());
  std::sort(te.begin(), te.end());
  return SplitResult{take(ds, tr), take(ds, va), take(ds, te)};
}

Standardizer Standardizer::fit(const MatrixXd& X) {
  Standardizer s;
  const auto n = static_cast<double>(X.cols());
  s.mean = X.rowwise().mean();
  s.scale.resize(X.rows());
  for (Eigen::Index j = 0; j < X.rows(); ++j) {
    const double var = (X.row(j).array() - s.mean[j]).square().sum() / std::max(n, 1.0);
    s.scale[j] = std::max(std::sqrt(var), 1e-12);
  }
  return s;
}

MatrixXd Standardizer::apply(const MatrixXd& X) const {
  return (X.colwise() - mean).array().colwise() / scale.array();
}

VectorXd Standardizer::apply(const VectorXd& x) const {
  return (x - mean).cwiseQuotient(scale);
}

}  // namespace survflow::data
