#include "gridars/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gridars/io.hpp"
#include "json.hpp"

namespace gridars {

namespace {

using nlohmann::json;

// Collects schema errors with their key paths; reads never throw, they record.
class Checker {
 public:
  explicit Checker(std::vector<std::string>& errors) : errors_(errors) {}

  void error(const std::string& path, const std::string& msg) {
    errors_.push_back(path + ": " + msg);
  }

  const json* object(const json& parent, const std::string& path, const std::string& key,
                     bool required, const std::set<std::string>& allowed_keys) {
    const json* j = member(parent, path, key, required);
    if (!j) return nullptr;
    if (!j->is_object()) {
      error(path + key, "expected an object");
      return nullptr;
    }
    for (const auto& [k, v] : j->items()) {
      if (!allowed_keys.count(k)) error(path + key + "." + k, "unknown key");
    }
    return j;
  }

  const json* member(const json& parent, const std::string& path, const std::string& key,
                     bool required) {
    if (!parent.contains(key)) {
      if (required) error(path + key, "missing required key");
      return nullptr;
    }
    return &parent.at(key);
  }

  template <typename T>
  std::optional<T> get(const json& parent, const std::string& path, const std::string& key,
                       bool required) {
    const json* j = member(parent, path, key, required);
    if (!j) return std::nullopt;
    try {
      return j->get<T>();
    } catch (const json::exception&) {
      error(path + key, "type mismatch");
      return std::nullopt;
    }
  }

  template <typename T>
  T get_or(const json& parent, const std::string& path, const std::string& key, T fallback) {
    auto v = get<T>(parent, path, key, false);
    return v.value_or(fallback);
  }

 private:
  std::vector<std::string>& errors_;
};

ArsHyperParams parse_hyper(Checker& ck, const json& parent, const std::string& path) {
  ArsHyperParams hyper;
  const json* j = ck.object(parent, path, "hyper", true,
                            {"alpha", "n_directions", "noise_std", "top_b", "decay",
                             "max_iters"});
  if (!j) return hyper;
  const std::string p = path + "hyper.";
  hyper.alpha = ck.get_or<double>(*j, p, "alpha", hyper.alpha);
  if (auto v = ck.get<int>(*j, p, "n_directions", true)) hyper.n_directions = *v;
  hyper.noise_std = ck.get_or<double>(*j, p, "noise_std", hyper.noise_std);
  if (auto v = ck.get<int>(*j, p, "top_b", true)) hyper.top_b = *v;
  hyper.decay = ck.get_or<double>(*j, p, "decay", hyper.decay);
  if (auto v = ck.get<int>(*j, p, "max_iters", true)) hyper.max_iters = *v;

  if (hyper.alpha <= 0) ck.error(p + "alpha", "must be positive");
  if (hyper.noise_std <= 0) ck.error(p + "noise_std", "must be positive");
  if (hyper.n_directions < 1) ck.error(p + "n_directions", "must be >= 1");
  if (hyper.top_b < 1 || hyper.top_b > hyper.n_directions) {
    ck.error(p + "top_b", "must satisfy 1 <= top_b <= n_directions (top_b=" +
                              std::to_string(hyper.top_b) + ", n_directions=" +
                              std::to_string(hyper.n_directions) + ")");
  }
  if (hyper.decay <= 0 || hyper.decay > 1) ck.error(p + "decay", "must be in (0, 1]");
  if (hyper.max_iters < 0) ck.error(p + "max_iters", "must be >= 0");
  return hyper;
}

GridTopology parse_topology(Checker& ck, const json& j, const std::string& path) {
  GridTopology topo;
  for (const auto& [k, v] : j.items()) {
    if (k != "buses" && k != "lines" && k != "areas") ck.error(path + k, "unknown key");
  }
  if (auto buses = ck.get<std::vector<int>>(j, path, "buses", true)) topo.buses = *buses;
  if (const json* lines = ck.member(j, path, "lines", true)) {
    if (!lines->is_array()) {
      ck.error(path + "lines", "expected an array");
    } else {
      int i = 0;
      for (const auto& l : *lines) {
        const std::string lp = path + "lines[" + std::to_string(i++) + "]";
        if (!l.is_array() || l.size() < 2 || l.size() > 3) {
          ck.error(lp, "expected [from, to] or [from, to, weight]");
          continue;
        }
        try {
          Line line;
          line.from = l.at(0).get<int>();
          line.to = l.at(1).get<int>();
          line.weight = l.size() > 2 ? l.at(2).get<double>() : 1.0;
          topo.lines.push_back(line);
        } catch (const json::exception&) {
          ck.error(lp, "type mismatch");
        }
      }
    }
  }
  if (const json* areas = ck.member(j, path, "areas", true)) {
    if (!areas->is_array()) {
      ck.error(path + "areas", "expected an array");
    } else {
      int i = 0;
      for (const auto& a : *areas) {
        const std::string ap = path + "areas[" + std::to_string(i++) + "].";
        AreaSpec area;
        for (const auto& [k, v] : a.items()) {
          if (k != "id" && k != "buses" && k != "loads") ck.error(ap + k, "unknown key");
        }
        if (auto id = ck.get<int>(a, ap, "id", true)) area.id = *id;
        if (auto buses = ck.get<std::vector<int>>(a, ap, "buses", true)) area.buses = *buses;
        if (const json* loads = ck.member(a, ap, "loads", true)) {
          int li = 0;
          for (const auto& l : *loads) {
            const std::string lp = ap + "loads[" + std::to_string(li++) + "].";
            LoadBus load;
            for (const auto& [k, v] : l.items()) {
              if (k != "bus" && k != "nominal_demand" && k != "demand_sag") {
                ck.error(lp + k, "unknown key");
              }
            }
            if (auto b = ck.get<int>(l, lp, "bus", true)) load.bus = *b;
            load.nominal_demand = ck.get_or<double>(l, lp, "nominal_demand", 1.0);
            load.demand_sag = ck.get_or<double>(l, lp, "demand_sag", 1.0);
            if (load.nominal_demand <= 0) ck.error(lp + "nominal_demand", "must be positive");
            if (load.demand_sag <= 0) ck.error(lp + "demand_sag", "must be positive");
            area.loads.push_back(load);
          }
        }
        topo.areas.push_back(std::move(area));
      }
    }
  }
  return topo;
}

ConfigParseResult parse_json_config(const json& root, const std::string& base_dir) {
  ConfigParseResult result;
  Checker ck(result.errors);
  RunConfig cfg;

  static const std::set<std::string> kTopKeys{
      "topology", "topology_file", "surrogate", "reward", "fault_defaults",
      "policy",   "training"};
  for (const auto& [k, v] : root.items()) {
    if (!kTopKeys.count(k)) ck.error(k, "unknown key");
  }

  const bool has_inline = root.contains("topology");
  const bool has_file = root.contains("topology_file");
  if (has_inline == has_file) {
    ck.error("topology", "exactly one of topology / topology_file is required");
  } else if (has_inline) {
    cfg.topology = parse_topology(ck, root.at("topology"), "topology.");
  } else {
    const auto rel = root.at("topology_file").get<std::string>();
    const auto path = std::filesystem::path(base_dir) / rel;
    try {
      cfg.topology = load_topology_file(path.string());
    } catch (const std::exception& e) {
      ck.error("topology_file", e.what());
    }
  }

  if (const json* s = ck.object(root, "", "surrogate", false,
                                {"v_stall", "v_recover", "kappa_stall", "kappa_recover",
                                 "stall_load_gain", "hop_decay", "dt_sim", "dt_control"})) {
    const std::string p = "surrogate.";
    cfg.surrogate.v_stall = ck.get_or<double>(*s, p, "v_stall", cfg.surrogate.v_stall);
    cfg.surrogate.v_recover = ck.get_or<double>(*s, p, "v_recover", cfg.surrogate.v_recover);
    cfg.surrogate.kappa_stall = ck.get_or<double>(*s, p, "kappa_stall", cfg.surrogate.kappa_stall);
    cfg.surrogate.kappa_recover =
        ck.get_or<double>(*s, p, "kappa_recover", cfg.surrogate.kappa_recover);
    cfg.surrogate.stall_load_gain =
        ck.get_or<double>(*s, p, "stall_load_gain", cfg.surrogate.stall_load_gain);
    cfg.surrogate.hop_decay = ck.get_or<double>(*s, p, "hop_decay", cfg.surrogate.hop_decay);
    cfg.surrogate.dt_sim = ck.get_or<double>(*s, p, "dt_sim", cfg.surrogate.dt_sim);
    cfg.surrogate.dt_control = ck.get_or<double>(*s, p, "dt_control", cfg.surrogate.dt_control);
    try {
      cfg.surrogate.validate();
    } catch (const std::exception& e) {
      ck.error("surrogate", e.what());
    }
  }

  if (const json* r = ck.object(root, "", "reward", false,
                                {"c1", "c2", "c3", "penalty", "terminate_on_penalty",
                                 "area_weights"})) {
    const std::string p = "reward.";
    cfg.reward.c1 = ck.get_or<double>(*r, p, "c1", cfg.reward.c1);
    cfg.reward.c2 = ck.get_or<double>(*r, p, "c2", cfg.reward.c2);
    cfg.reward.c3 = ck.get_or<double>(*r, p, "c3", cfg.reward.c3);
    cfg.reward.penalty = ck.get_or<double>(*r, p, "penalty", cfg.reward.penalty);
    cfg.reward.terminate_on_penalty =
        ck.get_or<bool>(*r, p, "terminate_on_penalty", cfg.reward.terminate_on_penalty);
    if (auto w = ck.get<std::vector<double>>(*r, p, "area_weights", false)) {
      cfg.area_weights = *w;
    }
    if (cfg.reward.c1 <= 0) ck.error(p + "c1", "must be positive");
    if (cfg.reward.c2 <= 0) ck.error(p + "c2", "must be positive");
    if (cfg.reward.c3 <= 0) ck.error(p + "c3", "must be positive");
    if (cfg.reward.penalty >= 0) ck.error(p + "penalty", "must be negative");
  }

  if (const json* f = ck.object(root, "", "fault_defaults", false,
                                {"t_fault", "depth", "episode_length"})) {
    const std::string p = "fault_defaults.";
    cfg.fault_defaults.t_fault = ck.get_or<double>(*f, p, "t_fault", cfg.fault_defaults.t_fault);
    cfg.fault_defaults.depth = ck.get_or<double>(*f, p, "depth", cfg.fault_defaults.depth);
    cfg.fault_defaults.episode_length =
        ck.get_or<double>(*f, p, "episode_length", cfg.fault_defaults.episode_length);
    if (cfg.fault_defaults.t_fault < 0) ck.error(p + "t_fault", "must be >= 0");
    if (cfg.fault_defaults.episode_length <= 0) ck.error(p + "episode_length", "must be positive");
  }

  if (const json* pol = ck.object(root, "", "policy", false,
                                  {"lstm_units", "dense_units", "action_bias"})) {
    const std::string p = "policy.";
    cfg.lstm_units = ck.get_or<int>(*pol, p, "lstm_units", cfg.lstm_units);
    cfg.dense_units = ck.get_or<int>(*pol, p, "dense_units", cfg.dense_units);
    cfg.action_bias = ck.get_or<double>(*pol, p, "action_bias", cfg.action_bias);
    if (cfg.lstm_units < 1) ck.error(p + "lstm_units", "must be >= 1");
    if (cfg.dense_units < 1) ck.error(p + "dense_units", "must be >= 1");
  }

  const json* tr = ck.object(root, "", "training", true,
                             {"seed", "schedule", "neighbors", "areas", "coordinator",
                              "centralized", "workers"});
  if (tr) {
    const std::string p = "training.";
    if (auto seed = ck.get<std::uint64_t>(*tr, p, "seed", true)) cfg.seed = *seed;
    if (const json* sch = ck.object(*tr, p, "schedule", false, {"h_l", "h_c"})) {
      cfg.schedule.h_l = ck.get_or<int>(*sch, p + "schedule.", "h_l", cfg.schedule.h_l);
      cfg.schedule.h_c = ck.get_or<int>(*sch, p + "schedule.", "h_c", cfg.schedule.h_c);
      if (cfg.schedule.h_l < 1) ck.error(p + "schedule.h_l", "must be >= 1");
      if (cfg.schedule.h_c < 1) ck.error(p + "schedule.h_c", "must be >= 1");
    }

    if (const json* nb = ck.member(*tr, p, "neighbors", false)) {
      if (nb->is_string()) {
        const auto s = nb->get<std::string>();
        if (s == "auto") {
          cfg.neighbors.kind = NeighborsSource::Kind::kAuto;
        } else {
          ck.error(p + "neighbors", "string value must be \"auto\"");
        }
      } else if (nb->is_object() && nb->contains("file")) {
        cfg.neighbors.kind = NeighborsSource::Kind::kFile;
        cfg.neighbors.file =
            (std::filesystem::path(base_dir) / nb->at("file").get<std::string>()).string();
      } else if (nb->is_object() && nb->contains("sets")) {
        cfg.neighbors.kind = NeighborsSource::Kind::kInline;
        try {
          cfg.neighbors.inline_sets = nb->at("sets").get<std::vector<std::vector<int>>>();
        } catch (const json::exception&) {
          ck.error(p + "neighbors.sets", "expected an array of bus-id arrays, one per area");
        }
      } else {
        ck.error(p + "neighbors", "expected \"auto\", {\"file\": ...} or {\"sets\": ...}");
      }
    }

    if (const json* areas = ck.member(*tr, p, "areas", true)) {
      if (!areas->is_array() || areas->empty()) {
        ck.error(p + "areas", "expected a non-empty array");
      } else {
        int i = 0;
        for (const auto& a : *areas) {
          const std::string ap = p + "areas[" + std::to_string(i++) + "].";
          AreaTrainingConfig at;
          for (const auto& [k, v] : a.items()) {
            if (k != "area" && k != "fault_buses" && k != "durations" && k != "hyper") {
              ck.error(ap + k, "unknown key");
            }
          }
          if (auto id = ck.get<int>(a, ap, "area", true)) at.area_id = *id;
          if (auto fb = ck.get<std::vector<int>>(a, ap, "fault_buses", true)) at.fault_buses = *fb;
          if (auto d = ck.get<std::vector<double>>(a, ap, "durations", true)) at.durations = *d;
          if (at.fault_buses.empty()) ck.error(ap + "fault_buses", "must not be empty");
          if (at.durations.empty()) ck.error(ap + "durations", "must not be empty");
          for (double d : at.durations) {
            if (d < 0) ck.error(ap + "durations", "durations must be >= 0");
          }
          at.hyper = parse_hyper(ck, a, ap);
          cfg.areas.push_back(std::move(at));
        }
      }
    }

    if (const json* co = ck.object(*tr, p, "coordinator", true,
                                   {"representative_buses", "durations", "action_mode",
                                    "decision_mode", "hyper"})) {
      const std::string cp = p + "coordinator.";
      if (const json* rb = ck.member(*co, cp, "representative_buses", false)) {
        if (rb->is_string() && rb->get<std::string>() == "auto") {
          // keep empty: seed-pinned pick at train time
        } else if (rb->is_array()) {
          try {
            cfg.coordinator.representative_buses = rb->get<std::vector<int>>();
          } catch (const json::exception&) {
            ck.error(cp + "representative_buses", "type mismatch");
          }
        } else {
          ck.error(cp + "representative_buses", "expected \"auto\" or an array of bus ids");
        }
      }
      if (auto d = ck.get<std::vector<double>>(*co, cp, "durations", true)) {
        cfg.coordinator.durations = *d;
      }
      const auto mode = ck.get_or<std::string>(*co, cp, "action_mode", "unrestricted");
      if (mode == "unrestricted") {
        cfg.coordinator.action_mode = CoordinatorActionSpace::Mode::kUnrestricted;
      } else if (mode == "restricted") {
        cfg.coordinator.action_mode = CoordinatorActionSpace::Mode::kRestricted;
      } else {
        ck.error(cp + "action_mode", "must be \"unrestricted\" or \"restricted\"");
      }
      const auto dmode = ck.get_or<std::string>(*co, cp, "decision_mode", "every-step");
      if (dmode == "every-step") {
        cfg.coordinator.decision_mode = CoordinatorDecisionMode::kEveryStep;
      } else if (dmode == "on-event") {
        cfg.coordinator.decision_mode = CoordinatorDecisionMode::kOnEvent;
      } else {
        ck.error(cp + "decision_mode", "must be \"every-step\" or \"on-event\"");
      }
      cfg.coordinator.hyper = parse_hyper(ck, *co, cp);
    }

    if (const json* ce = ck.object(*tr, p, "centralized", false,
                                   {"fault_buses", "durations", "hyper"})) {
      const std::string cp = p + "centralized.";
      CentralizedTrainingConfig cc;
      if (auto fb = ck.get<std::vector<int>>(*ce, cp, "fault_buses", true)) cc.fault_buses = *fb;
      if (auto d = ck.get<std::vector<double>>(*ce, cp, "durations", true)) cc.durations = *d;
      cc.hyper = parse_hyper(ck, *ce, cp);
      cfg.centralized = std::move(cc);
    }

    cfg.workers = ck.get_or<int>(*tr, p, "workers", 0);
    if (cfg.workers < 0) ck.error(p + "workers", "must be >= 0");
  }

  // Cross-field validation once the pieces parsed.
  if (result.errors.empty()) {
    try {
      cfg.topology.validate();
    } catch (const std::exception& e) {
      ck.error("topology", e.what());
    }
  }
  if (result.errors.empty()) {
    if (cfg.areas.size() != cfg.topology.areas.size()) {
      ck.error("training.areas",
               "need one entry per topology area (" + std::to_string(cfg.topology.areas.size()) +
                   " areas, " + std::to_string(cfg.areas.size()) + " entries)");
    } else {
      for (std::size_t i = 0; i < cfg.areas.size(); ++i) {
        if (cfg.areas[i].area_id != cfg.topology.areas[i].id) {
          ck.error("training.areas[" + std::to_string(i) + "].area",
                   "must follow topology area order");
        }
      }
    }
    if (cfg.area_weights.empty()) {
      cfg.area_weights.assign(cfg.topology.areas.size(), 5.0);
    } else if (cfg.area_weights.size() != cfg.topology.areas.size()) {
      ck.error("reward.area_weights", "need one weight per area");
    }
    if (!cfg.coordinator.representative_buses.empty() &&
        cfg.coordinator.representative_buses.size() != cfg.topology.areas.size()) {
      ck.error("training.coordinator.representative_buses", "need one bus per area");
    }
    if (cfg.neighbors.kind == NeighborsSource::Kind::kInline &&
        cfg.neighbors.inline_sets.size() != cfg.topology.areas.size()) {
      ck.error("training.neighbors.sets", "need one set per area");
    }
  }

  if (result.errors.empty()) result.config = std::move(cfg);
  return result;
}

}  // namespace

ConfigParseResult parse_config_text(const std::string& text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    return ConfigParseResult{std::nullopt, {std::string("malformed JSON: ") + e.what()}};
  }
  return parse_json_config(root, base_dir);
}

ConfigParseResult parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) return ConfigParseResult{std::nullopt, {"cannot open config file " + path}};
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(),
                           std::filesystem::path(path).parent_path().string());
}

std::string serialize_config(const RunConfig& cfg) {
  json lines = json::array();
  for (const auto& l : cfg.topology.lines) lines.push_back(json::array({l.from, l.to, l.weight}));
  json areas = json::array();
  for (const auto& a : cfg.topology.areas) {
    json loads = json::array();
    for (const auto& l : a.loads) {
      loads.push_back(json{{"bus", l.bus},
                           {"nominal_demand", l.nominal_demand},
                           {"demand_sag", l.demand_sag}});
    }
    areas.push_back(json{{"id", a.id}, {"buses", a.buses}, {"loads", loads}});
  }

  auto hyper_json = [](const ArsHyperParams& h) {
    return json{{"alpha", h.alpha},         {"n_directions", h.n_directions},
                {"noise_std", h.noise_std}, {"top_b", h.top_b},
                {"decay", h.decay},         {"max_iters", h.max_iters}};
  };

  json training_areas = json::array();
  for (const auto& a : cfg.areas) {
    training_areas.push_back(json{{"area", a.area_id},
                                  {"fault_buses", a.fault_buses},
                                  {"durations", a.durations},
                                  {"hyper", hyper_json(a.hyper)}});
  }

  json neighbors;
  switch (cfg.neighbors.kind) {
    case NeighborsSource::Kind::kAuto:
      neighbors = "auto";
      break;
    case NeighborsSource::Kind::kFile:
      neighbors = json{{"file", cfg.neighbors.file}};
      break;
    case NeighborsSource::Kind::kInline:
      neighbors = json{{"sets", cfg.neighbors.inline_sets}};
      break;
  }

  json coordinator{
      {"representative_buses",
       cfg.coordinator.representative_buses.empty()
           ? json("auto")
           : json(cfg.coordinator.representative_buses)},
      {"durations", cfg.coordinator.durations},
      {"action_mode",
       cfg.coordinator.action_mode == CoordinatorActionSpace::Mode::kUnrestricted
           ? "unrestricted"
           : "restricted"},
      {"decision_mode",
       cfg.coordinator.decision_mode == CoordinatorDecisionMode::kEveryStep ? "every-step"
                                                                            : "on-event"},
      {"hyper", hyper_json(cfg.coordinator.hyper)}};

  json training{{"seed", cfg.seed},
                {"schedule", {{"h_l", cfg.schedule.h_l}, {"h_c", cfg.schedule.h_c}}},
                {"neighbors", neighbors},
                {"areas", training_areas},
                {"coordinator", coordinator},
                {"workers", cfg.workers}};
  if (cfg.centralized) {
    training["centralized"] = json{{"fault_buses", cfg.centralized->fault_buses},
                                   {"durations", cfg.centralized->durations},
                                   {"hyper", hyper_json(cfg.centralized->hyper)}};
  }

  json root{
      {"topology", {{"buses", cfg.topology.buses}, {"lines", lines}, {"areas", areas}}},
      {"surrogate",
       {{"v_stall", cfg.surrogate.v_stall},
        {"v_recover", cfg.surrogate.v_recover},
        {"kappa_stall", cfg.surrogate.kappa_stall},
        {"kappa_recover", cfg.surrogate.kappa_recover},
        {"stall_load_gain", cfg.surrogate.stall_load_gain},
        {"hop_decay", cfg.surrogate.hop_decay},
        {"dt_sim", cfg.surrogate.dt_sim},
        {"dt_control", cfg.surrogate.dt_control}}},
      {"reward",
       {{"c1", cfg.reward.c1},
        {"c2", cfg.reward.c2},
        {"c3", cfg.reward.c3},
        {"penalty", cfg.reward.penalty},
        {"terminate_on_penalty", cfg.reward.terminate_on_penalty},
        {"area_weights", cfg.area_weights}}},
      {"fault_defaults",
       {{"t_fault", cfg.fault_defaults.t_fault},
        {"depth", cfg.fault_defaults.depth},
        {"episode_length", cfg.fault_defaults.episode_length}}},
      {"policy",
       {{"lstm_units", cfg.lstm_units},
        {"dense_units", cfg.dense_units},
        {"action_bias", cfg.action_bias}}},
      {"training", training}};
  return root.dump(2) + "\n";
}

bool config_equal(const RunConfig& a, const RunConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace gridars
