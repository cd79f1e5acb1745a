#include "rmt/vote.hpp"

#include <algorithm>

namespace rmt {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Unanimous: return "unanimous";
    case Verdict::Majority: return "majority";
    case Verdict::NoMajority: return "no_majority";
  }
  return "?";
}

VoteResult compare_and_vote(std::span<const Ballot> ballots) {
  VoteResult result;
  std::vector<std::vector<ReplicaId>> groups;
  for (const auto& ballot : ballots) {
    if (!ballot.event) continue;
    auto it = std::find_if(result.tally.begin(), result.tally.end(),
                           [&](const auto& entry) { return entry.first == *ballot.event; });
    if (it == result.tally.end()) {
      result.tally.emplace_back(*ballot.event, 1);
      groups.push_back({ballot.replica});
    } else {
      ++it->second;
      groups[static_cast<std::size_t>(it - result.tally.begin())].push_back(ballot.replica);
    }
  }

  const std::size_t n = ballots.size();
  std::size_t best = groups.size();
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (2 * groups[i].size() > n) best = i;
  }
  if (best == groups.size()) {
    result.verdict = Verdict::NoMajority;
    return result;
  }

  result.canonical = result.tally[best].first;
  result.supporters = groups[best];
  std::sort(result.supporters.begin(), result.supporters.end());
  for (const auto& ballot : ballots) {
    if (!std::binary_search(result.supporters.begin(), result.supporters.end(), ballot.replica)) {
      result.minority.push_back(ballot.replica);
    }
  }
  std::sort(result.minority.begin(), result.minority.end());
  result.verdict = result.minority.empty() ? Verdict::Unanimous : Verdict::Majority;
  return result;
}

}  // namespace rmt
