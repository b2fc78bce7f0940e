#include "ddest/config_io.hpp"

#include <set>
#include <sstream>

namespace ddest {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown config key '" + where + "." + it.key() + "'");
}

template <typename T>
T get_as(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + where + "." + key + "': " + e.what());
  }
}

template <typename T>
void read_if(const json& j, const std::string& key, const std::string& where, T& out) {
  if (j.contains(key)) out = get_as<T>(j, key, where);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("empty entry in list '" + text + "'");
    out.push_back(item.substr(b, e - b + 1));
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

}  // namespace

json grid_to_json(const GridConfig& cfg) {
  return json{{"N", cfg.N},   {"L", cfg.L},     {"Q", cfg.Q},     {"P_afdm", cfg.P_afdm},
              {"c1", cfg.c1}, {"c2", cfg.c2},   {"p_d", cfg.p_d}, {"p_D", cfg.p_D}};
}

GridConfig grid_from_json(const json& j) {
  reject_unknown(j, {"N", "L", "Q", "B", "P_afdm", "c1", "c2", "p_d", "p_D"}, "grid");
  GridConfig cfg = GridConfig::reference_profile();
  read_if(j, "N", "grid", cfg.N);
  read_if(j, "L", "grid", cfg.L);
  read_if(j, "Q", "grid", cfg.Q);
  read_if(j, "P_afdm", "grid", cfg.P_afdm);
  read_if(j, "p_d", "grid", cfg.p_d);
  read_if(j, "p_D", "grid", cfg.p_D);
  if (cfg.N <= 0) throw ConfigError("grid.N must be positive");
  cfg.c1 = -static_cast<Real>(cfg.P_afdm) / (2.0 * cfg.N);
  cfg.c2 = 1.0 / (20.0 * cfg.N);
  read_if(j, "c1", "grid", cfg.c1);
  read_if(j, "c2", "grid", cfg.c2);
  if (j.contains("B") && get_as<int>(j, "B", "grid") != cfg.B()) throw ConfigError("grid.B must equal 2Q+1");
  cfg.validate();
  return cfg;
}

json pilot_to_json(const PilotConfig& pc) {
  json values = json::array();
  for (const Complex& v : pc.pilot_values) values.push_back({v.real(), v.imag()});
  return json{{"n_p", pc.n_p},
              {"layout", to_string(pc.layout)},
              {"window_size", pc.window_size},
              {"spacing", pc.spacing},
              {"pilot_positions", pc.pilot_positions},
              {"pilot_values", values},
              {"obs_indices", pc.obs_indices},
              {"guard_overhead", pc.guard_overhead}};
}

json experiment_to_json(const ExperimentConfig& cfg) {
  json est = json::array();
  for (EstimatorKind k : cfg.estimators) est.push_back(to_string(k));
  return json{{"grid", grid_to_json(cfg.grid)},
              {"n_p", cfg.n_p},
              {"pilot_layout", to_string(cfg.pilot_layout)},
              {"snr_db_list", cfg.snr_db_list},
              {"n_trials", cfg.n_trials},
              {"master_seed", cfg.master_seed},
              {"estimators", est},
              {"lambda_reg", cfg.lambda_reg},
              {"require_nonempty", cfg.require_nonempty},
              {"noiseless", cfg.noiseless},
              {"sbl",
               {{"max_iters", cfg.sbl.max_iters},
                {"tol", cfg.sbl.tol},
                {"prune_threshold", cfg.sbl.prune_threshold}}}};
}

ExperimentConfig experiment_from_json(const json& j, const ExperimentConfig& base) {
  const std::string top = "config";
  reject_unknown(j,
                 {"grid", "n_p", "pilot_layout", "snr_db_list", "n_trials", "master_seed", "estimators",
                  "lambda_reg", "require_nonempty", "noiseless", "sbl"},
                 top);
  ExperimentConfig cfg = base;
  if (j.contains("grid")) {
    json merged = grid_to_json(base.grid);
    // Derived chirp parameters follow N/P_afdm unless given explicitly.
    merged.erase("c1");
    merged.erase("c2");
    merged.update(j.at("grid"));
    cfg.grid = grid_from_json(merged);
  }
  if (j.contains("n_p")) {
    const json& v = j.at("n_p");
    if (v.is_array())
      cfg.n_p = get_as<std::vector<int>>(j, "n_p", top);
    else
      cfg.n_p = {get_as<int>(j, "n_p", top)};
  }
  if (j.contains("pilot_layout")) cfg.pilot_layout = pilot_layout_from_string(get_as<std::string>(j, "pilot_layout", top));
  read_if(j, "snr_db_list", top, cfg.snr_db_list);
  read_if(j, "n_trials", top, cfg.n_trials);
  read_if(j, "master_seed", top, cfg.master_seed);
  if (j.contains("estimators")) {
    cfg.estimators.clear();
    for (const auto& name : get_as<std::vector<std::string>>(j, "estimators", top))
      cfg.estimators.push_back(estimator_from_string(name));
  }
  read_if(j, "lambda_reg", top, cfg.lambda_reg);
  read_if(j, "require_nonempty", top, cfg.require_nonempty);
  read_if(j, "noiseless", top, cfg.noiseless);
  if (j.contains("sbl")) {
    const json& s = j.at("sbl");
    reject_unknown(s, {"max_iters", "tol", "prune_threshold"}, "sbl");
    read_if(s, "max_iters", "sbl", cfg.sbl.max_iters);
    read_if(s, "tol", "sbl", cfg.sbl.tol);
    read_if(s, "prune_threshold", "sbl", cfg.sbl.prune_threshold);
  }
  cfg.validate();
  return cfg;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &j;
  const auto parts = split(key, '.');
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    json& child = (*node)[parts[i]];
    if (child.is_null()) child = json::object();
    if (!child.is_object()) throw ConfigError("override path '" + key + "' crosses a non-object value");
    node = &child;
  }
  (*node)[parts.back()] = std::move(value);
}

std::vector<Real> parse_real_list(const std::string& text) {
  std::vector<Real> out;
  for (const auto& item : split(text, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + item + "'");
    }
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& item : split(text, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("not an integer: '" + item + "'");
    }
  }
  return out;
}

std::vector<EstimatorKind> parse_estimator_list(const std::string& text) {
  std::vector<EstimatorKind> out;
  for (const auto& item : split(text, ',')) out.push_back(estimator_from_string(item));
  return out;
}

}  // namespace ddest
