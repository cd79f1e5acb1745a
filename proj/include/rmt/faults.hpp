#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <variant>

#include "rmt/replica_manager.hpp"
#include "rmt/vote.hpp"

namespace rmt {

struct RegisterBit {
  ReplicaId replica = 0;
  std::uint8_t reg = 0;
  std::uint8_t bit = 0;
  friend bool operator==(const RegisterBit&, const RegisterBit&) = default;
};

/// One replica's private view of a memory byte.
struct MemoryBit {
  ReplicaId replica = 0;
  PageIndex page = 0;
  std::uint16_t byte = 0;
  std::uint8_t bit = 0;
  friend bool operator==(const MemoryBit&, const MemoryBit&) = default;
};

/// The physical backing that `replica` maps at `page`; every region sharing
/// that backing sees the flip.
struct BackingBit {
  ReplicaId replica = 0;
  PageIndex page = 0;
  std::uint16_t byte = 0;
  std::uint8_t bit = 0;
  friend bool operator==(const BackingBit&, const BackingBit&) = default;
};

/// The core stops making progress for good.
struct CorePermanent {
  CoreId core = 0;
  friend bool operator==(const CorePermanent&, const CorePermanent&) = default;
};

/// A bit of the replica state in flight to the master over the shared
/// polling channel (flips a digest bit of that replica's event).
struct ChannelBit {
  ReplicaId replica = 0;
  std::uint8_t bit = 0;
  friend bool operator==(const ChannelBit&, const ChannelBit&) = default;
};

using FaultTarget = std::variant<RegisterBit, MemoryBit, BackingBit, CorePermanent, ChannelBit>;

/// Fires before the instruction that would make instr_count exceed `count`.
struct AtInstruction {
  std::uint64_t count = 0;
  friend bool operator==(const AtInstruction&, const AtInstruction&) = default;
};

/// Fires at the boundary before the segment that ends in event `index`
/// (index 0 is the first segment).
struct AtEventIndex {
  std::uint64_t index = 0;
  friend bool operator==(const AtEventIndex&, const AtEventIndex&) = default;
};

using FaultTrigger = std::variant<AtInstruction, AtEventIndex>;

struct FaultSpec {
  FaultTarget target;
  FaultTrigger trigger;

  /// Bit ranges, and event-index triggers for shared targets.
  void validate() const;
  std::string describe() const;
  std::string_view family() const;
  friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

enum class OutcomeClass : std::uint8_t { Masked, DetectedCorrected, DetectedUnrecoverable, SDC, Hang };

std::string_view to_string(OutcomeClass o);
OutcomeClass parse_outcome(std::string_view text);

enum class FaultEffect : std::uint8_t { Applied, CorrectedByEcc, NotApplicable };

struct FaultContext {
  ReplicaManager& replicas;
  std::set<CoreId>& failed_cores;
  bool ecc_memory = false;
  std::span<Ballot> ballots;  // events in flight, for ChannelBit
};

/// Applies one fault to live run state. Faults whose target no longer
/// exists (a sleeping replica, an unmapped page) have no effect.
FaultEffect apply_fault(const FaultSpec& spec, FaultContext& context);

}  // namespace rmt
