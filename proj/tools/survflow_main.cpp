#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "survflow/pipeline.hpp"

using nlohmann::json;
using namespace survflow;

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

void log_event(const json& fields) {
  json j = fields;
  j["elapsed_s"] = now_seconds();
  std::cerr << j.dump() << "\n";
}

io::RunConfig load_config(const std::string& path) {
  if (path.empty()) {
    return io::parse_run_config_text("{\"schema_version\": 1}");
  }
  return io::parse_run_config(path);
}

Eigen::VectorXd parse_covariate_list(const std::string& text, int expected_dim) {
  std::vector<double> values;
  if (!text.empty()) {
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
  }
  if (values.empty()) return Eigen::VectorXd::Zero(expected_dim);
  if (static_cast<int>(values.size()) != expected_dim) {
    throw DimensionError("--x must list exactly " + std::to_string(expected_dim) +
                         " values");
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<Eigen::Index>(values.size()));
}

void write_json(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

train::EpochCallback epoch_logger() {
  return [](int epoch, double train_loss, double val_loss, double lr) {
    log_event({{"event", "epoch"},
               {"epoch", epoch},
               {"train_loss", train_loss},
               {"val_loss", val_loss},
               {"lr", lr}});
  };
}

int cmd_generate(const std::string& config_path, const std::string& out_path,
                 std::optional<std::uint64_t> seed) {
  io::RunConfig cfg = load_config(config_path);
  if (seed) cfg.data.seed = *seed;
  const data::SyntheticSpec spec = data::SyntheticSpec::calibrated(
      cfg.data.dim, rng::derive(cfg.data.seed, 7), cfg.data.target_censoring);
  data::SyntheticSpec spec_p = spec;
  spec_p.mixture_p = cfg.data.mixture_p;
  const data::Dataset ds = data::generate_synthetic(spec_p, cfg.data.n, cfg.data.seed,
                                                    cfg.data.debug_columns);
  data::write_csv(ds, out_path);
  log_event({{"event", "generate"},
             {"rows", cfg.data.n},
             {"censoring_rate", ds.censoring_rate()},
             {"out", out_path}});
  std::cout << "wrote " << cfg.data.n << " rows to " << out_path
            << " (censoring rate " << ds.censoring_rate() << ")\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& dataset_path,
              const std::string& out_path, const std::string& metrics_path,
              const std::string& init_path, std::optional<std::uint64_t> seed) {
  io::RunConfig cfg = load_config(config_path);
  if (seed) cfg.train.seed = *seed;
  const data::Dataset ds = data::load_csv(dataset_path);

  std::optional<Eigen::VectorXd> warm_start;
  if (!init_path.empty()) {
    const io::Checkpoint prev = io::load_checkpoint(init_path);
    cfg.model = prev.dynamics;
    warm_start = prev.params;
  }

  const pipeline::TrainedModel trained =
      pipeline::train_on_dataset(ds, cfg.model, cfg.model_seed, cfg.train,
                                 cfg.train_fraction, cfg.val_fraction, epoch_logger(),
                                 warm_start);

  io::TrainMeta meta;
  meta.seed = cfg.train.seed;
  meta.epochs = static_cast<int>(trained.fit.train_history.size());
  meta.best_epoch = trained.fit.best_epoch;
  meta.best_val_nll = trained.fit.best_val;
  meta.final_train_loss =
      trained.fit.train_history.empty() ? 0.0 : trained.fit.train_history.back();
  io::save_checkpoint(
      io::make_checkpoint(trained.model, trained.standardizer, trained.feature_names, meta),
      out_path);

  if (!metrics_path.empty()) {
    json j;
    j["train_loss"] = trained.fit.train_history;
    j["val_loss"] = trained.fit.val_history;
    j["best_epoch"] = trained.fit.best_epoch;
    j["best_val_nll"] = trained.fit.best_val;
    write_json(j, metrics_path);
  }
  std::cout << "checkpoint written to " << out_path << " (best validation NLL "
            << trained.fit.best_val << ")\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_path,
             const std::string& out_path, std::optional<std::uint64_t> seed,
             int threads) {
  const io::Checkpoint ckpt = io::load_checkpoint(checkpoint_path);
  const dyn::FlowModel model = io::model_from_checkpoint(ckpt);
  const data::Dataset ds = data::load_csv(dataset_path);
  if (ds.size() == 0) throw DomainError("eval: empty dataset");
  if (!ckpt.standardizer) throw ConfigError("eval: checkpoint lacks a standardizer");

  io::EvalConfig ecfg;
  if (seed) ecfg.seed = *seed;
  ecfg.threads = threads;
  const pipeline::EvalReport report =
      pipeline::evaluate_model(model, *ckpt.standardizer, ds, ecfg);

  json j;
  j["concordance"] = report.concordance;
  j["nll"] = report.nll;
  j["n"] = report.n;
  j["censoring_rate"] = report.censoring_rate;
  json cal = json::array();
  for (const auto& pt : report.calibration) {
    cal.push_back({{"u", pt.u}, {"event_coverage", pt.event_coverage}});
  }
  j["calibration"] = cal;
  write_json(j, out_path);
  return 0;
}

int cmd_curves(const std::string& checkpoint_path, const std::string& x_text,
               double t_min, double t_max, int points, const std::string& out_path) {
  const io::Checkpoint ckpt = io::load_checkpoint(checkpoint_path);
  const dyn::FlowModel model = io::model_from_checkpoint(ckpt);
  Eigen::VectorXd x = parse_covariate_list(x_text, model.cfg.covariate_dim);
  if (ckpt.standardizer) x = ckpt.standardizer->apply(x);

  if (!(t_min > 0.0 && t_max > t_min) || points < 2) {
    throw DomainError("curves: need 0 < t-min < t-max and at least 2 points");
  }
  std::ofstream out(out_path);
  if (!out) throw ParseError("cannot open '" + out_path + "' for writing");
  out << "t,f,S,h\n";
  const odeint::SolverConfig cfg = odeint::SolverConfig::evaluation();
  Eigen::VectorXd ts(points);
  for (int i = 0; i < points; ++i) {
    ts[i] = t_min * std::pow(t_max / t_min, static_cast<double>(i) / (points - 1));
  }
  Eigen::MatrixXd X(x.size(), points);
  X.colwise() = x;
  const flow::EvalBatch ev = flow::evaluate_batch(model, ts, X, cfg);
  char buf[160];
  for (int i = 0; i < points; ++i) {
    const double f = std::exp(ev.log_density[i]);
    const double s = ev.survival[i];
    const double h = s > 1e-12 ? f / s : std::numeric_limits<double>::quiet_NaN();
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", ts[i], f, s, h);
    out << buf;
  }
  std::cout << "curves written to " << out_path << "\n";
  return 0;
}

int cmd_portfolio(const std::string& config_path, const std::string& checkpoint_path,
                  const std::string& out_path, const std::string& losses_path,
                  std::optional<std::uint64_t> seed) {
  io::RunConfig cfg = load_config(config_path);
  if (seed) cfg.portfolio.seed = *seed;

  std::optional<pipeline::TrainedModel> pretrained;
  if (!checkpoint_path.empty()) {
    const io::Checkpoint ckpt = io::load_checkpoint(checkpoint_path);
    if (!ckpt.standardizer) throw ConfigError("portfolio: checkpoint lacks a standardizer");
    pipeline::TrainedModel tm;
    tm.model = io::model_from_checkpoint(ckpt);
    tm.standardizer = *ckpt.standardizer;
    tm.feature_names = ckpt.feature_names;
    pretrained = std::move(tm);
  }

  const pipeline::PortfolioRun run = pipeline::run_portfolio_experiment(
      cfg.portfolio, cfg.model, cfg.model_seed, cfg.train, epoch_logger(), pretrained);

  json j;
  j["alpha"] = cfg.portfolio.alpha;
  j["horizon"] = run.horizon;
  j["budget"] = run.report.budget;
  j["training_censoring_rate"] = run.training_censoring_rate;
  j["objective_flow"] = run.report.objective_flow;
  j["objective_weibull"] = run.report.objective_weibull;
  j["realized_es_flow"] = run.report.realized_es_flow;
  j["realized_es_weibull"] = run.report.realized_es_weibull;
  j["prices"] = std::vector<double>(run.report.prices.data(),
                                    run.report.prices.data() + run.report.prices.size());
  j["weights_flow"] =
      std::vector<double>(run.report.weights_flow.data(),
                          run.report.weights_flow.data() + run.report.weights_flow.size());
  j["weights_weibull"] = std::vector<double>(
      run.report.weights_weibull.data(),
      run.report.weights_weibull.data() + run.report.weights_weibull.size());
  // Unit exposure per entity; the covered notional behind each indicator.
  j["exposure"] = std::vector<double>(static_cast<std::size_t>(run.report.prices.size()), 1.0);
  write_json(j, out_path);

  if (!losses_path.empty()) {
    std::ofstream out(losses_path);
    if (!out) throw ParseError("cannot open '" + losses_path + "' for writing");
    out << "scenario,loss_flow,loss_weibull\n";
    for (Eigen::Index s = 0; s < run.report.realized_losses_flow.size(); ++s) {
      out << s << "," << run.report.realized_losses_flow[s] << ","
          << run.report.realized_losses_weibull[s] << "\n";
    }
  }
  std::cout << "realized expected shortfall: flow " << run.report.realized_es_flow
            << ", per-class Weibull " << run.report.realized_es_weibull << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"survflow: conditional normalizing-flow survival models"};
  app.require_subcommand(1);

  std::string config_path, dataset_path, out_path, metrics_path, init_path;
  std::string checkpoint_path, x_text, losses_path;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  double t_min = 1e-3, t_max = 10.0;
  int points = 200;

  auto* gen = app.add_subcommand("generate", "write a synthetic censored dataset CSV");
  gen->add_option("--config", config_path, "RunConfig JSON path");
  gen->add_option("--out", out_path, "output CSV")->required();
  gen->add_option("--seed", seed, "override data.seed");

  auto* tr = app.add_subcommand("train", "fit a flow on a dataset CSV");
  tr->add_option("--config", config_path, "RunConfig JSON path");
  tr->add_option("--dataset", dataset_path, "input CSV")->required();
  tr->add_option("--out", out_path, "output checkpoint")->required();
  tr->add_option("--metrics-out", metrics_path, "loss-curve JSON");
  tr->add_option("--init-checkpoint", init_path, "warm-start checkpoint");
  tr->add_option("--seed", seed, "override train.seed");

  auto* ev = app.add_subcommand("eval", "score a checkpoint on a dataset CSV");
  ev->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  ev->add_option("--dataset", dataset_path, "input CSV")->required();
  ev->add_option("--out", out_path, "metrics JSON ('-' for stdout)");
  ev->add_option("--seed", seed, "sampling seed");
  ev->add_option("--threads", threads, "sampling fan-out threads");

  auto* cu = app.add_subcommand("curves", "emit (t, f, S, h) rows for one covariate row");
  cu->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  cu->add_option("--x", x_text, "comma-separated covariates (raw scale)");
  cu->add_option("--t-min", t_min, "grid start (> 0)");
  cu->add_option("--t-max", t_max, "grid end");
  cu->add_option("--points", points, "grid size");
  cu->add_option("--out", out_path, "output CSV")->required();

  auto* po = app.add_subcommand("portfolio", "run the credit-insurance experiment");
  po->add_option("--config", config_path, "RunConfig JSON path");
  po->add_option("--checkpoint", checkpoint_path, "pretrained flow (skips training)");
  po->add_option("--out", out_path, "report JSON ('-' for stdout)");
  po->add_option("--losses-out", losses_path, "realized-loss CSV");
  po->add_option("--seed", seed, "override portfolio.seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(config_path, out_path, seed);
    if (tr->parsed()) {
      return cmd_train(config_path, dataset_path, out_path, metrics_path, init_path, seed);
    }
    if (ev->parsed()) return cmd_eval(checkpoint_path, dataset_path, out_path, seed, threads);
    if (cu->parsed()) return cmd_curves(checkpoint_path, x_text, t_min, t_max, points, out_path);
    if (po->parsed()) {
      return cmd_portfolio(config_path, checkpoint_path, out_path, losses_path, seed);
    }
  } catch (const Error& e) {
    log_event({{"event", "error"}, {"what", e.what()}});
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
