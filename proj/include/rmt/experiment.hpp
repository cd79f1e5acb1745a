#pragma once

#include <optional>

#include "rmt/report.hpp"
#include "rmt/scenario.hpp"

namespace rmt {

/// Native baseline row plus one replicated run with the scenario's faults.
Report cmd_run(const Scenario& scenario);

/// Golden row, one row per campaign run (ordered by index) and one
/// histogram row per outcome class. `seed` overrides campaign.seed.
Report cmd_campaign(const Scenario& scenario, std::optional<std::uint64_t> seed = std::nullopt,
                    std::optional<std::size_t> jobs = std::nullopt);

/// Per workload: a native row and one row per axis value; then one gm row
/// per (n, strategy, mechanism) group across workloads.
Report cmd_sweep(const Scenario& scenario);

}  // namespace rmt
