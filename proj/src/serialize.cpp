#include "survflow/serialize.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>

#include "survflow/errors.hpp"

namespace survflow::io {

using nlohmann::json;

std::string encode_doubles_hex(const Eigen::Ref<const Eigen::VectorXd>& values) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(static_cast<std::size_t>(values.size()) * 16);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double v = values[i];
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int k = 15; k >= 0; --k) {
      out.push_back(digits[(bits >> (4 * k)) & 0xF]);
    }
  }
  return out;
}

Eigen::VectorXd decode_doubles_hex(const std::string& hex) {
  if (hex.size() % 16 != 0) throw ParseError("hex payload length must be a multiple of 16");
  const auto n = static_cast<Eigen::Index>(hex.size() / 16);
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 16; ++k) {
      const char c = hex[static_cast<std::size_t>(i * 16 + k)];
      std::uint64_t v;
      if (c >= '0' && c <= '9') {
        v = static_cast<std::uint64_t>(c - '0');
      } else if (c >= 'a' && c <= 'f') {
        v = static_cast<std::uint64_t>(c - 'a') + 10;
      } else if (c >= 'A' && c <= 'F') {
        v = static_cast<std::uint64_t>(c - 'A') + 10;
      } else {
        throw ParseError("hex payload contains a non-hex character");
      }
      bits = (bits << 4) | v;
    }
    std::memcpy(&out[i], &bits, sizeof(bits));
  }
  return out;
}

namespace {

void reject_unknown(const json& j, const std::vector<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

json dynamics_to_json(const dyn::DynamicsConfig& cfg) {
  json j;
  j["covariate_dim"] = cfg.covariate_dim;
  j["basis_count"] = cfg.basis_count;
  j["levels"] = cfg.levels;
  j["hierarchy"] = dyn::to_string(cfg.mode);
  j["gate_time"] = cfg.gate_time;
  j["breakpoints"] = cfg.breakpoints;
  j["centers"] = cfg.centers;
  j["widths"] = cfg.widths;
  j["pi_width"] = cfg.pi_width;
  j["pi_depth"] = cfg.pi_depth;
  j["sigma_width"] = cfg.sigma_width;
  j["sigma_depth"] = cfg.sigma_depth;
  j["g_width"] = cfg.g_width;
  j["g_depth"] = cfg.g_depth;
  j["hierarchy_weight"] = cfg.hierarchy_weight;
  return j;
}

dyn::DynamicsConfig dynamics_from_json(const json& j, const std::string& where,
                                       const dyn::DynamicsConfig& base) {
  reject_unknown(j,
                 {"covariate_dim", "basis_count", "levels", "hierarchy", "gate_time",
                  "breakpoints", "centers", "widths", "pi_width", "pi_depth",
                  "sigma_width", "sigma_depth", "g_width", "g_depth",
                  "hierarchy_weight", "seed"},
                 where);
  dyn::DynamicsConfig cfg = base;
  if (j.contains("covariate_dim")) cfg.covariate_dim = j["covariate_dim"].get<int>();
  if (j.contains("basis_count")) cfg.basis_count = j["basis_count"].get<int>();
  if (j.contains("levels")) cfg.levels = j["levels"].get<int>();
  if (j.contains("hierarchy")) {
    cfg.mode = dyn::hierarchy_mode_from_string(j["hierarchy"].get<std::string>());
  }
  if (j.contains("gate_time")) cfg.gate_time = j["gate_time"].get<double>();
  if (j.contains("breakpoints")) {
    cfg.breakpoints = j["breakpoints"].get<std::vector<double>>();
  }
  if (j.contains("centers")) cfg.centers = j["centers"].get<std::vector<double>>();
  if (j.contains("widths")) cfg.widths = j["widths"].get<std::vector<double>>();
  if (j.contains("pi_width")) cfg.pi_width = j["pi_width"].get<int>();
  if (j.contains("pi_depth")) cfg.pi_depth = j["pi_depth"].get<int>();
  if (j.contains("sigma_width")) cfg.sigma_width = j["sigma_width"].get<int>();
  if (j.contains("sigma_depth")) cfg.sigma_depth = j["sigma_depth"].get<int>();
  if (j.contains("g_width")) cfg.g_width = j["g_width"].get<int>();
  if (j.contains("g_depth")) cfg.g_depth = j["g_depth"].get<int>();
  if (j.contains("hierarchy_weight")) {
    cfg.hierarchy_weight = j["hierarchy_weight"].get<double>();
  }
  return cfg;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "survflow-checkpoint";
  j["dynamics"] = dynamics_to_json(ckpt.dynamics);
  const net::ParamLayout layout = dyn::model_layout(ckpt.dynamics);
  if (ckpt.params.size() != layout.total()) {
    throw DimensionError("save_checkpoint: parameter size does not match the layout");
  }
  json segs = json::array();
  for (const auto& s : layout.segments) {
    segs.push_back({{"name", s.name}, {"offset", s.offset}, {"size", s.size}});
  }
  j["segments"] = segs;
  j["payload_hex"] = encode_doubles_hex(ckpt.params);
  if (ckpt.standardizer) {
    j["standardizer"] = {
        {"mean_hex", encode_doubles_hex(ckpt.standardizer->mean)},
        {"scale_hex", encode_doubles_hex(ckpt.standardizer->scale)},
    };
  }
  j["feature_names"] = ckpt.feature_names;
  j["metadata"] = {
      {"seed", ckpt.meta.seed},
      {"epochs", ckpt.meta.epochs},
      {"best_epoch", ckpt.meta.best_epoch},
      {"best_val_nll", ckpt.meta.best_val_nll},
      {"final_train_loss", ckpt.meta.final_train_loss},
  };
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  if (!j.contains("schema_version") || j["schema_version"].get<int>() != kSchemaVersion) {
    throw ConfigError("checkpoint: missing or unsupported schema_version");
  }
  if (j.value("kind", "") != std::string("survflow-checkpoint")) {
    throw ConfigError("checkpoint: unexpected document kind");
  }
  Checkpoint ckpt;
  ckpt.dynamics = dynamics_from_json(j.at("dynamics"), "dynamics", {});
  dyn::validate(ckpt.dynamics);
  ckpt.params = decode_doubles_hex(j.at("payload_hex").get<std::string>());
  const net::ParamLayout layout = dyn::model_layout(ckpt.dynamics);
  if (ckpt.params.size() != layout.total()) {
    throw ParseError("checkpoint: payload size does not match the dynamics layout");
  }
  if (j.contains("standardizer")) {
    data::Standardizer s;
    s.mean = decode_doubles_hex(j["standardizer"].at("mean_hex").get<std::string>());
    s.scale = decode_doubles_hex(j["standardizer"].at("scale_hex").get<std::string>());
    ckpt.standardizer = std::move(s);
  }
  if (j.contains("feature_names")) {
    ckpt.feature_names = j["feature_names"].get<std::vector<std::string>>();
  }
  if (j.contains("metadata")) {
    const auto& m = j["metadata"];
    ckpt.meta.seed = m.value("seed", std::uint64_t{0});
    ckpt.meta.epochs = m.value("epochs", 0);
    ckpt.meta.best_epoch = m.value("best_epoch", -1);
    ckpt.meta.best_val_nll = m.value("best_val_nll", 0.0);
    ckpt.meta.final_train_loss = m.value("final_train_loss", 0.0);
  }
  return ckpt;
}

dyn::FlowModel model_from_checkpoint(const Checkpoint& ckpt) {
  dyn::FlowModel model = dyn::init_model(ckpt.dynamics, 0);
  dyn::unpack(model, ckpt.params);
  return model;
}

Checkpoint make_checkpoint(const dyn::FlowModel& model,
                           const std::optional<data::Standardizer>& standardizer,
                           const std::vector<std::string>& feature_names,
                           const TrainMeta& meta) {
  Checkpoint ckpt;
  ckpt.dynamics = model.cfg;
  ckpt.params = dyn::pack(model).values;
  ckpt.standardizer = standardizer;
  ckpt.feature_names = feature_names;
  ckpt.meta = meta;
  return ckpt;
}

namespace {

// Hyperparameter rows for the named public studies (S_pi, S_sigma, S_g,
// L_pi, L_sigma, L_g, K).
struct StudyRow {
  const char* name;
  int s_pi, s_sigma, s_g, l_pi, l_sigma, l_g, k;
};
constexpr StudyRow kStudyRows[] = {
    {"support", 4, 4, 12, 3, 3, 3, 16},
    {"whas", 12, 8, 12, 4, 4, 3, 32},
    {"rgbsg", 4, 4, 12, 3, 3, 3, 16},
    {"metabric", 4, 4, 12, 3, 4, 4, 32},
};

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  reject_unknown(j, {"schema_version", "data", "model", "train", "eval", "portfolio"},
                 "config root");
  if (!j.contains("schema_version")) {
    throw ConfigError("config: schema_version is required");
  }
  if (j["schema_version"].get<int>() != kSchemaVersion) {
    throw ConfigError("config: unsupported schema_version");
  }

  RunConfig cfg;

  if (j.contains("data")) {
    const auto& d = j["data"];
    reject_unknown(d,
                   {"name", "n", "dim", "seed", "mixture_p", "target_censoring",
                    "debug_columns"},
                   "data");
    cfg.data.name = d.value("name", cfg.data.name);
    cfg.data.n = d.value("n", cfg.data.n);
    cfg.data.dim = d.value("dim", cfg.data.dim);
    cfg.data.seed = d.value("seed", cfg.data.seed);
    cfg.data.mixture_p = d.value("mixture_p", cfg.data.mixture_p);
    cfg.data.target_censoring = d.value("target_censoring", cfg.data.target_censoring);
    cfg.data.debug_columns = d.value("debug_columns", cfg.data.debug_columns);
  }

  // Base model defaults, overridden by a study row when the name matches.
  dyn::DynamicsConfig base;
  base.covariate_dim = cfg.data.dim;
  base.basis_count = 8;
  base.pi_width = 8;
  base.pi_depth = 2;
  base.sigma_width = 4;
  base.sigma_depth = 2;
  base.g_width = 8;
  base.g_depth = 2;
  for (const auto& row : kStudyRows) {
    if (cfg.data.name == row.name) {
      base.basis_count = row.k;
      base.pi_width = row.s_pi;
      base.pi_depth = row.l_pi;
      base.sigma_width = row.s_sigma;
      base.sigma_depth = row.l_sigma;
      base.g_width = row.s_g;
      base.g_depth = row.l_g;
      break;
    }
  }
  if (j.contains("model")) {
    cfg.model = dynamics_from_json(j["model"], "model", base);
    cfg.model_seed = j["model"].value("seed", std::uint64_t{0});
  } else {
    cfg.model = base;
  }

  if (j.contains("train")) {
    const auto& t = j["train"];
    reject_unknown(t,
                   {"learning_rate", "batch_size", "max_epochs", "patience",
                    "hierarchy_weight", "seed", "fixed_steps", "loss",
                    "train_fraction", "val_fraction"},
                   "train");
    cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
    cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
    cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
    cfg.train.patience = t.value("patience", cfg.train.patience);
    cfg.train.hierarchy_weight = t.value("hierarchy_weight", cfg.train.hierarchy_weight);
    cfg.train.seed = t.value("seed", cfg.train.seed);
    cfg.train.fixed_steps = t.value("fixed_steps", cfg.train.fixed_steps);
    if (t.contains("loss")) {
      const std::string kind = t["loss"].get<std::string>();
      if (kind == "censored") {
        cfg.train.loss = train::LossKind::Censored;
      } else if (kind == "hierarchical") {
        cfg.train.loss = train::LossKind::Hierarchical;
      } else {
        throw ConfigError("train.loss must be 'censored' or 'hierarchical'");
      }
    }
    cfg.train_fraction = t.value("train_fraction", cfg.train_fraction);
    cfg.val_fraction = t.value("val_fraction", cfg.val_fraction);
  }

  if (j.contains("eval")) {
    const auto& e = j["eval"];
    reject_unknown(e,
                   {"method", "rtol", "atol", "fixed_steps", "risk_samples", "seed",
                    "score_kind", "threads"},
                   "eval");
    if (e.contains("method")) {
      const std::string m = e["method"].get<std::string>();
      if (m == "rk54") {
        cfg.eval.solver.method = odeint::Method::AdaptiveRK54;
      } else if (m == "rk32") {
        cfg.eval.solver.method = odeint::Method::AdaptiveRK32;
      } else if (m == "rk4") {
        cfg.eval.solver.method = odeint::Method::FixedRK4;
      } else {
        throw ConfigError("eval.method must be rk54, rk32 or rk4");
      }
    }
    cfg.eval.solver.rtol = e.value("rtol", cfg.eval.solver.rtol);
    cfg.eval.solver.atol = e.value("atol", cfg.eval.solver.atol);
    cfg.eval.solver.fixed_steps = e.value("fixed_steps", cfg.eval.solver.fixed_steps);
    cfg.eval.risk_samples = e.value("risk_samples", cfg.eval.risk_samples);
    cfg.eval.seed = e.value("seed", cfg.eval.seed);
    cfg.eval.threads = e.value("threads", cfg.eval.threads);
    if (e.contains("score_kind")) {
      const std::string k = e["score_kind"].get<std::string>();
      if (k == "win_fraction") {
        cfg.eval.score_kind = metrics::ScoreKind::WinFraction;
      } else if (k == "negative_mean_time") {
        cfg.eval.score_kind = metrics::ScoreKind::NegativeMeanTime;
      } else {
        throw ConfigError("eval.score_kind must be win_fraction or negative_mean_time");
      }
    }
  }

  if (j.contains("portfolio")) {
    const auto& p = j["portfolio"];
    reject_unknown(p,
                   {"classes", "entities_per_class", "obs_per_entity", "alpha",
                    "budget_fraction", "horizon_quantile", "pricing_scenarios",
                    "optimization_scenarios", "realization_scenarios", "seed"},
                   "portfolio");
    cfg.portfolio.classes = p.value("classes", cfg.portfolio.classes);
    cfg.portfolio.entities_per_class =
        p.value("entities_per_class", cfg.portfolio.entities_per_class);
    cfg.portfolio.obs_per_entity = p.value("obs_per_entity", cfg.portfolio.obs_per_entity);
    cfg.portfolio.alpha = p.value("alpha", cfg.portfolio.alpha);
    cfg.portfolio.budget_fraction =
        p.value("budget_fraction", cfg.portfolio.budget_fraction);
    cfg.portfolio.horizon_quantile =
        p.value("horizon_quantile", cfg.portfolio.horizon_quantile);
    cfg.portfolio.pricing_scenarios =
        p.value("pricing_scenarios", cfg.portfolio.pricing_scenarios);
    cfg.portfolio.optimization_scenarios =
        p.value("optimization_scenarios", cfg.portfolio.optimization_scenarios);
    cfg.portfolio.realization_scenarios =
        p.value("realization_scenarios", cfg.portfolio.realization_scenarios);
    cfg.portfolio.seed = p.value("seed", cfg.portfolio.seed);
  }

  dyn::validate(cfg.model);
  train::validate(cfg.train);
  return cfg;
}

RunConfig parse_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_run_config_text(text);
}

}  // namespace survflow::io
