#include "gridars/io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "gridars/csv.hpp"
#include "gridars/rng.hpp"
#include "json.hpp"

namespace gridars {

namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

json spec_to_json(const LstmPolicySpec& spec) {
  return json{{"input_dim", spec.input_dim},
              {"lstm_units", spec.lstm_units},
              {"dense_units", spec.dense_units},
              {"head",
               {{"kind", spec.head.kind == HeadKind::kContinuous ? "continuous" : "discrete"},
                {"arity", spec.head.arity}}}};
}

LstmPolicySpec spec_from_json(const json& j) {
  LstmPolicySpec spec;
  spec.input_dim = j.at("input_dim").get<int>();
  spec.lstm_units = j.at("lstm_units").get<int>();
  spec.dense_units = j.at("dense_units").get<int>();
  const std::string kind = j.at("head").at("kind").get<std::string>();
  if (kind == "continuous") {
    spec.head.kind = HeadKind::kContinuous;
  } else if (kind == "discrete") {
    spec.head.kind = HeadKind::kDiscrete;
  } else {
    throw std::runtime_error("unknown head kind: " + kind);
  }
  spec.head.arity = j.at("head").at("arity").get<int>();
  spec.validate();
  return spec;
}

json normalizer_to_json(const RunningNormalizer& n) {
  return json{{"n", n.count()}, {"mean", n.mean_vector()}, {"m2", n.m2_vector()}};
}

RunningNormalizer normalizer_from_json(const json& j) {
  return RunningNormalizer::restore(j.at("n").get<long long>(),
                                    j.at("mean").get<std::vector<double>>(),
                                    j.at("m2").get<std::vector<double>>());
}

json policy_to_json(const AreaPolicy& p) {
  return json{{"spec", spec_to_json(p.spec)},
              {"params", p.theta.values},
              {"layout_version", p.theta.layout_version},
              {"normalizer", normalizer_to_json(p.stats)},
              {"action_bias", p.action_bias}};
}

AreaPolicy policy_from_json(const json& j) {
  AreaPolicy p;
  p.spec = spec_from_json(j.at("spec"));
  p.theta.values = j.at("params").get<std::vector<double>>();
  p.theta.layout_version = j.at("layout_version").get<int>();
  p.stats = normalizer_from_json(j.at("normalizer"));
  p.action_bias = j.at("action_bias").get<double>();
  if (p.theta.size() != p.spec.param_count()) {
    throw std::runtime_error("policy record: parameter count does not match spec");
  }
  return p;
}

json subsets_to_json(const std::vector<AreaSubset>& subsets) {
  json out = json::array();
  for (const auto& s : subsets) out.push_back(s.areas);
  return out;
}

std::vector<AreaSubset> subsets_from_json(const json& j) {
  std::vector<AreaSubset> out;
  for (const auto& entry : j) out.push_back(AreaSubset{entry.get<std::vector<int>>()});
  return out;
}

}  // namespace

std::uint64_t hyper_fingerprint(const ArsHyperParams& hyper) {
  auto mix_double = [](std::uint64_t acc, double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    return rng::derive(acc, bits);
  };
  std::uint64_t acc = 0x6172735f68797065ULL;
  acc = mix_double(acc, hyper.alpha);
  acc = rng::derive(acc, static_cast<std::uint64_t>(hyper.n_directions));
  acc = mix_double(acc, hyper.noise_std);
  acc = rng::derive(acc, static_cast<std::uint64_t>(hyper.top_b));
  acc = mix_double(acc, hyper.decay);
  acc = rng::derive(acc, static_cast<std::uint64_t>(hyper.max_iters));
  return acc;
}

void save_checkpoint(const PolicyCheckpoint& checkpoint, const std::string& path) {
  json j{{"kind", "gridars_checkpoint"},
         {"layout_version", checkpoint.layout_version},
         {"name", checkpoint.learner.name},
         {"iteration", checkpoint.learner.iteration},
         {"alpha", checkpoint.learner.alpha},
         {"noise_std", checkpoint.learner.noise_std},
         {"master_seed", checkpoint.learner.master_seed},
         {"final", checkpoint.learner.final_checkpoint},
         {"total_env_steps", checkpoint.learner.total_env_steps},
         {"hyper_fingerprint", checkpoint.hyper_fingerprint},
         {"action_bias", checkpoint.action_bias},
         {"spec", spec_to_json(checkpoint.spec)},
         {"params", checkpoint.learner.theta.values},
         {"normalizer", normalizer_to_json(checkpoint.learner.obs_stats)}};
  write_json_file(j, path);
}

PolicyCheckpoint load_checkpoint(const std::string& path) {
  const json j = read_json_file(path);
  try {
    if (j.at("kind").get<std::string>() != "gridars_checkpoint") {
      throw std::runtime_error("not a checkpoint file");
    }
    const int version = j.at("layout_version").get<int>();
    if (version != kParamLayoutVersion) {
      throw std::runtime_error("layout_version mismatch: file has " + std::to_string(version) +
                               ", this build expects " + std::to_string(kParamLayoutVersion));
    }
    PolicyCheckpoint cp;
    cp.layout_version = version;
    cp.learner.name = j.at("name").get<std::string>();
    cp.learner.iteration = j.at("iteration").get<int>();
    cp.learner.alpha = j.at("alpha").get<double>();
    cp.learner.noise_std = j.at("noise_std").get<double>();
    cp.learner.master_seed = j.at("master_seed").get<std::uint64_t>();
    cp.learner.final_checkpoint = j.at("final").get<bool>();
    cp.learner.total_env_steps = j.at("total_env_steps").get<long long>();
    cp.hyper_fingerprint = j.at("hyper_fingerprint").get<std::uint64_t>();
    cp.action_bias = j.at("action_bias").get<double>();
    cp.spec = spec_from_json(j.at("spec"));
    cp.learner.theta.values = j.at("params").get<std::vector<double>>();
    if (cp.learner.theta.size() != cp.spec.param_count()) {
      throw std::runtime_error("parameter count does not match spec");
    }
    cp.learner.obs_stats = normalizer_from_json(j.at("normalizer"));
    return cp;
  } catch (const json::exception& e) {
    throw std::runtime_error("corrupt checkpoint " + path + ": " + e.what());
  }
}

void save_bundle(const Bundle& bundle, const std::string& path) {
  json areas = json::array();
  for (const auto& area : bundle.topology.areas) {
    json loads = json::array();
    for (const auto& l : area.loads) {
      loads.push_back(json{{"bus", l.bus},
                           {"nominal_demand", l.nominal_demand},
                           {"demand_sag", l.demand_sag}});
    }
    areas.push_back(json{{"id", area.id}, {"buses", area.buses}, {"loads", loads}});
  }
  json lines = json::array();
  for (const auto& l : bundle.topology.lines) {
    lines.push_back(json{{"from", l.from}, {"to", l.to}, {"weight", l.weight}});
  }
  json per_fault = json::array();
  for (const auto& list : bundle.action_space.per_fault_area) {
    per_fault.push_back(subsets_to_json(list));
  }
  json lower = json::array();
  for (const auto& p : bundle.lower) lower.push_back(policy_to_json(p));

  json j{{"kind", "gridars_bundle"},
         {"layout_version", kParamLayoutVersion},
         {"topology", {{"buses", bundle.topology.buses}, {"lines", lines}, {"areas", areas}}},
         {"surrogate",
          {{"v_stall", bundle.surrogate.v_stall},
           {"v_recover", bundle.surrogate.v_recover},
           {"kappa_stall", bundle.surrogate.kappa_stall},
           {"kappa_recover", bundle.surrogate.kappa_recover},
           {"stall_load_gain", bundle.surrogate.stall_load_gain},
           {"hop_decay", bundle.surrogate.hop_decay},
           {"dt_sim", bundle.surrogate.dt_sim},
           {"dt_control", bundle.surrogate.dt_control}}},
         {"reward",
          {{"c1", bundle.reward.c1},
           {"c2", bundle.reward.c2},
           {"c3", bundle.reward.c3},
           {"penalty", bundle.reward.penalty},
           {"terminate_on_penalty", bundle.reward.terminate_on_penalty}}},
         {"area_weights", bundle.area_weights},
         {"schedule", {{"h_l", bundle.schedule.h_l}, {"h_c", bundle.schedule.h_c}}},
         {"decision_mode",
          bundle.decision_mode == CoordinatorDecisionMode::kEveryStep ? "every-step"
                                                                      : "on-event"},
         {"neighbor_buses", bundle.neighbor_buses},
         {"action_space",
          {{"mode",
            bundle.action_space.mode == CoordinatorActionSpace::Mode::kUnrestricted
                ? "unrestricted"
                : "restricted"},
           {"unrestricted", subsets_to_json(bundle.action_space.unrestricted)},
           {"per_fault_area", per_fault}}},
         {"lower", lower},
         {"coordinator", policy_to_json(bundle.coordinator)}};
  write_json_file(j, path);
}

Bundle load_bundle(const std::string& path) {
  const json j = read_json_file(path);
  try {
    if (j.at("kind").get<std::string>() != "gridars_bundle") {
      throw std::runtime_error("not a bundle file");
    }
    Bundle b;
    const auto& topo = j.at("topology");
    b.topology.buses = topo.at("buses").get<std::vector<int>>();
    for (const auto& l : topo.at("lines")) {
      b.topology.lines.push_back(Line{l.at("from").get<int>(), l.at("to").get<int>(),
                                      l.at("weight").get<double>()});
    }
    for (const auto& a : topo.at("areas")) {
      AreaSpec area;
      area.id = a.at("id").get<int>();
      area.buses = a.at("buses").get<std::vector<int>>();
      for (const auto& l : a.at("loads")) {
        area.loads.push_back(LoadBus{l.at("bus").get<int>(), l.at("nominal_demand").get<double>(),
                                     l.at("demand_sag").get<double>()});
      }
      b.topology.areas.push_back(std::move(area));
    }
    const auto& s = j.at("surrogate");
    b.surrogate.v_stall = s.at("v_stall").get<double>();
    b.surrogate.v_recover = s.at("v_recover").get<double>();
    b.surrogate.kappa_stall = s.at("kappa_stall").get<double>();
    b.surrogate.kappa_recover = s.at("kappa_recover").get<double>();
    b.surrogate.stall_load_gain = s.at("stall_load_gain").get<double>();
    b.surrogate.hop_decay = s.at("hop_decay").get<double>();
    b.surrogate.dt_sim = s.at("dt_sim").get<double>();
    b.surrogate.dt_control = s.at("dt_control").get<double>();
    const auto& r = j.at("reward");
    b.reward.c1 = r.at("c1").get<double>();
    b.reward.c2 = r.at("c2").get<double>();
    b.reward.c3 = r.at("c3").get<double>();
    b.reward.penalty = r.at("penalty").get<double>();
    b.reward.terminate_on_penalty = r.at("terminate_on_penalty").get<bool>();
    b.area_weights = j.at("area_weights").get<std::vector<double>>();
    b.schedule.h_l = j.at("schedule").at("h_l").get<int>();
    b.schedule.h_c = j.at("schedule").at("h_c").get<int>();
    b.decision_mode = j.at("decision_mode").get<std::string>() == "on-event"
                          ? CoordinatorDecisionMode::kOnEvent
                          : CoordinatorDecisionMode::kEveryStep;
    b.neighbor_buses = j.at("neighbor_buses").get<std::vector<std::vector<int>>>();
    const auto& space = j.at("action_space");
    b.action_space.mode = space.at("mode").get<std::string>() == "restricted"
                              ? CoordinatorActionSpace::Mode::kRestricted
                              : CoordinatorActionSpace::Mode::kUnrestricted;
    b.action_space.unrestricted = subsets_from_json(space.at("unrestricted"));
    for (const auto& list : space.at("per_fault_area")) {
      b.action_space.per_fault_area.push_back(subsets_from_json(list));
    }
    for (const auto& p : j.at("lower")) b.lower.push_back(policy_from_json(p));
    b.coordinator = policy_from_json(j.at("coordinator"));
    return b;
  } catch (const json::exception& e) {
    throw std::runtime_error("corrupt bundle " + path + ": " + e.what());
  }
}

void save_neighbor_reports(const std::vector<NeighborReport>& reports, const std::string& path) {
  json areas = json::array();
  for (const auto& report : reports) {
    json probes = json::array();
    for (const auto& p : report.probes) {
      probes.push_back(json{{"fault_bus", p.fault_bus}, {"duration", p.duration}});
    }
    json findings = json::object();
    for (const auto& [area_id, list] : report.selection.findings_by_area) {
      json entries = json::array();
      for (const auto& f : list) {
        entries.push_back(json{{"bus", f.bus}, {"violated", f.violated}, {"nadir", f.nadir}});
      }
      findings[std::to_string(area_id)] = entries;
    }
    areas.push_back(json{{"area", report.area_id},
                         {"probes", probes},
                         {"findings_by_area", findings},
                         {"selected", report.selection.selected}});
  }
  write_json_file(json{{"kind", "gridars_neighbors"}, {"areas", areas}}, path);
}

std::vector<NeighborReport> load_neighbor_reports(const std::string& path) {
  const json j = read_json_file(path);
  std::vector<NeighborReport> reports;
  try {
    for (const auto& a : j.at("areas")) {
      NeighborReport report;
      report.area_id = a.at("area").get<int>();
      for (const auto& p : a.at("probes")) {
        report.probes.push_back(
            ProbeSpec{p.at("fault_bus").get<int>(), p.at("duration").get<double>()});
      }
      for (const auto& [key, list] : a.at("findings_by_area").items()) {
        std::vector<BusFinding> findings;
        for (const auto& f : list) {
          findings.push_back(BusFinding{f.at("bus").get<int>(), f.at("violated").get<bool>(),
                                        f.at("nadir").get<double>()});
        }
        report.selection.findings_by_area[std::stoi(key)] = std::move(findings);
      }
      report.selection.selected = a.at("selected").get<std::vector<int>>();
      reports.push_back(std::move(report));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("corrupt neighbor report " + path + ": " + e.what());
  }
  return reports;
}

GridTopology load_topology_file(const std::string& path) {
  const json j = read_json_file(path);
  try {
    GridTopology topo;
    topo.buses = j.at("buses").get<std::vector<int>>();
    for (const auto& l : j.at("lines")) {
      Line line;
      line.from = l.at(0).get<int>();
      line.to = l.at(1).get<int>();
      line.weight = l.size() > 2 ? l.at(2).get<double>() : 1.0;
      topo.lines.push_back(line);
    }
    for (const auto& a : j.at("areas")) {
      AreaSpec area;
      area.id = a.at("id").get<int>();
      area.buses = a.at("buses").get<std::vector<int>>();
      for (const auto& l : a.at("loads")) {
        LoadBus load;
        load.bus = l.at("bus").get<int>();
        load.nominal_demand = l.value("nominal_demand", 1.0);
        load.demand_sag = l.value("demand_sag", 1.0);
        area.loads.push_back(load);
      }
      topo.areas.push_back(std::move(area));
    }
    topo.validate();
    return topo;
  } catch (const json::exception& e) {
    throw std::runtime_error("bad topology file " + path + ": " + e.what());
  }
}

void save_topology_file(const GridTopology& topology, const std::string& path) {
  json lines = json::array();
  for (const auto& l : topology.lines) lines.push_back(json::array({l.from, l.to, l.weight}));
  json areas = json::array();
  for (const auto& a : topology.areas) {
    json loads = json::array();
    for (const auto& l : a.loads) {
      loads.push_back(json{{"bus", l.bus},
                           {"nominal_demand", l.nominal_demand},
                           {"demand_sag", l.demand_sag}});
    }
    areas.push_back(json{{"id", a.id}, {"buses", a.buses}, {"loads", loads}});
  }
  write_json_file(json{{"buses", topology.buses}, {"lines", lines}, {"areas", areas}}, path);
}

std::vector<NamedScenario> load_scenarios(const std::string& path,
                                          const FaultScenario& defaults) {
  const json j = read_json_file(path);
  std::vector<NamedScenario> out;
  try {
    for (const auto& s : j.at("scenarios")) {
      NamedScenario ns;
      ns.id = s.at("id").get<std::string>();
      ns.scenario = defaults;
      if (s.contains("fault_bus") && !s.at("fault_bus").is_null()) {
        ns.scenario.fault_bus = s.at("fault_bus").get<int>();
      } else {
        ns.scenario.fault_bus.reset();
      }
      ns.scenario.duration = s.value("duration", 0.0);
      ns.scenario.t_fault = s.value("t_fault", defaults.t_fault);
      ns.scenario.depth = s.value("depth", defaults.depth);
      ns.scenario.episode_length = s.value("episode_length", defaults.episode_length);
      out.push_back(std::move(ns));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("bad scenario file " + path + ": " + e.what());
  }
  if (out.empty()) throw std::runtime_error("scenario file " + path + " is empty");
  return out;
}

void write_trace_csv(const GridEnv& env, const EpisodeTrace& trace, const std::string& path) {
  csv::Writer w(path);
  w.header({"time", "bus", "voltage", "remaining", "action"});
  std::vector<int> load_of_bus(env.bus_count(), -1);
  for (int l = 0; l < env.load_count(); ++l) {
    load_of_bus[env.bus_index(env.load_buses()[l].bus)] = l;
  }
  for (const auto& step : trace.steps) {
    for (int j = 0; j < env.bus_count(); ++j) {
      w.cell(step.t);
      w.cell(env.topology().buses[j]);
      w.cell(step.voltage[j]);
      const int l = load_of_bus[j];
      if (l >= 0) {
        w.cell(step.remaining[l]);
        w.cell(step.action[l]);
      } else {
        w.cell(std::string{});
        w.cell(std::string{});
      }
      w.end_row();
    }
  }
}

}  // namespace gridars
