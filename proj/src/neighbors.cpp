#include "gridars/neighbors.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "gridars/rollout.hpp"

namespace gridars {

std::vector<ProbeResult> probe_area(const GridEnv& env, int area_id,
                                    std::span<const double> durations,
                                    const FaultScenario& base) {
  const int a = env.area_index(area_id);
  const auto& loads = env.area_load_indices(a);
  if (loads.empty()) {
    throw std::invalid_argument("probe_area: area " + std::to_string(area_id) +
                                " has no controllable load bus");
  }

  std::vector<ProbeResult> results;
  for (int l : loads) {
    const int fault_bus = env.load_buses()[l].bus;
    for (double duration : durations) {
      FaultScenario scenario = base;
      scenario.fault_bus = fault_bus;
      scenario.duration = duration;

      ProbeResult pr;
      pr.probe = ProbeSpec{fault_bus, duration};
      pr.t_pf = scenario.t_clear();
      pr.voltage_by_bus.resize(env.bus_count());

      const auto rr = scripted_rollout(env, scenario, {}, true);
      for (const auto& step : rr.trace->steps) {
        pr.times.push_back(step.t);
        for (int j = 0; j < env.bus_count(); ++j) pr.voltage_by_bus[j].push_back(step.voltage[j]);
      }
      results.push_back(std::move(pr));
    }
  }
  return results;
}

NeighborSelection select_neighbors(const GridEnv& env, int area_id,
                                   std::span<const ProbeResult> probes,
                                   const RecoveryProfile& profile, double nadir_threshold,
                                   int max_per_area) {
  const int own = env.area_index(area_id);
  NeighborSelection out;

  for (int foreign = 0; foreign < env.area_count(); ++foreign) {
    if (foreign == own) continue;
    const auto& area = env.topology().areas[foreign];
    std::vector<BusFinding> findings;
    for (int bus : area.buses) {
      const int j = env.bus_index(bus);
      BusFinding f;
      f.bus = bus;
      f.nadir = std::numeric_limits<double>::infinity();
      for (const auto& probe : probes) {
        const auto check =
            check_profile_violation(probe.times, probe.voltage_by_bus[j], profile, probe.t_pf);
        f.violated = f.violated || check.violated;
        f.nadir = std::min(f.nadir, check.nadir);
      }
      findings.push_back(f);
    }

    const int violating =
        static_cast<int>(std::count_if(findings.begin(), findings.end(),
                                       [](const BusFinding& f) { return f.violated; }));
    const int smallness =
        std::max(1, static_cast<int>(0.05 * static_cast<double>(area.buses.size())));
    const bool considered = violating > smallness;

    if (considered) {
      std::vector<BusFinding> qualified;
      for (const auto& f : findings) {
        if (f.violated && f.nadir < nadir_threshold) qualified.push_back(f);
      }
      // Representative worst-affected: keep the lowest nadirs when over cap.
      std::sort(qualified.begin(), qualified.end(), [](const auto& a, const auto& b) {
        if (a.nadir != b.nadir) return a.nadir < b.nadir;
        return a.bus < b.bus;
      });
      if (static_cast<int>(qualified.size()) > max_per_area) qualified.resize(max_per_area);
      for (const auto& f : qualified) out.selected.push_back(f.bus);
    }
    out.findings_by_area[area.id] = std::move(findings);
  }
  std::sort(out.selected.begin(), out.selected.end());
  return out;
}

NeighborReport discover_neighbors(const GridEnv& env, int area_id,
                                  std::span<const double> durations, const FaultScenario& base,
                                  const RecoveryProfile& profile, double nadir_threshold,
                                  int max_per_area) {
  NeighborReport report;
  report.area_id = area_id;
  const auto probes = probe_area(env, area_id, durations, base);
  for (const auto& p : probes) report.probes.push_back(p.probe);
  report.selection =
      select_neighbors(env, area_id, probes, profile, nadir_threshold, max_per_area);
  return report;
}

}  // namespace gridars
