#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rmt/vm.hpp"

namespace rmt {

/// One replica's contribution to a vote. A replica that never reached an
/// event (stalled core, runaway loop) has no event and supports nothing.
struct Ballot {
  ReplicaId replica = 0;
  std::optional<ExternalizationEvent> event;
};

enum class Verdict : std::uint8_t { Unanimous, Majority, NoMajority };

std::string_view to_string(Verdict v);

struct VoteResult {
  Verdict verdict = Verdict::NoMajority;
  std::optional<ExternalizationEvent> canonical;
  std::vector<ReplicaId> supporters;  // ascending
  std::vector<ReplicaId> minority;    // ascending; everyone else
  /// Distinct events with their supporter counts, in first-seen order.
  std::vector<std::pair<ExternalizationEvent, std::size_t>> tally;
};

/// Groups identical events. Unanimous if all N ballots carry one event,
/// Majority if one group holds strictly more than N/2, NoMajority otherwise.
VoteResult compare_and_vote(std::span<const Ballot> ballots);

/// Replicas needed to outvote f simultaneous faults.
constexpr std::size_t required_replicas(std::size_t faults) { return 2 * faults + 1; }

}  // namespace rmt
