#include "rmt/faults.hpp"

#include <sstream>

namespace rmt {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

bool is_event_trigger(const FaultTrigger& t) { return std::holds_alternative<AtEventIndex>(t); }

}  // namespace

void FaultSpec::validate() const {
  std::visit(overloaded{
                 [](const RegisterBit& f) {
                   if (f.reg >= kRegisterCount) throw ConfigError("register index must be < 8");
                   if (f.bit >= 64) throw ConfigError("register bit must be < 64");
                 },
                 [](const MemoryBit& f) {
                   if (f.page >= kMaxPages || f.byte >= kPageSize) throw ConfigError("memory fault outside a page");
                   if (f.bit >= 8) throw ConfigError("byte bit must be < 8");
                 },
                 [this](const BackingBit& f) {
                   if (f.page >= kMaxPages || f.byte >= kPageSize) throw ConfigError("backing fault outside a page");
                   if (f.bit >= 8) throw ConfigError("byte bit must be < 8");
                   if (!is_event_trigger(trigger)) throw ConfigError("backing faults need an event-index trigger");
                 },
                 [this](const CorePermanent&) {
                   if (!is_event_trigger(trigger)) throw ConfigError("core faults need an event-index trigger");
                 },
                 [this](const ChannelBit& f) {
                   if (f.bit >= 64) throw ConfigError("channel bit must be < 64");
                   if (!is_event_trigger(trigger)) throw ConfigError("channel faults need an event-index trigger");
                 },
             },
             target);
}

std::string_view FaultSpec::family() const {
  return std::visit(overloaded{
                        [](const RegisterBit&) { return std::string_view("register"); },
                        [](const MemoryBit&) { return std::string_view("memory"); },
                        [](const BackingBit&) { return std::string_view("backing"); },
                        [](const CorePermanent&) { return std::string_view("core"); },
                        [](const ChannelBit&) { return std::string_view("channel"); },
                    },
                    target);
}

std::string FaultSpec::describe() const {
  std::ostringstream out;
  std::visit(overloaded{
                 [&](const RegisterBit& f) {
                   out << "register replica=" << f.replica << " r" << int(f.reg) << " bit=" << int(f.bit);
                 },
                 [&](const MemoryBit& f) {
                   out << "memory replica=" << f.replica << " page=" << f.page << " byte=" << f.byte
                       << " bit=" << int(f.bit);
                 },
                 [&](const BackingBit& f) {
                   out << "backing replica=" << f.replica << " page=" << f.page << " byte=" << f.byte
                       << " bit=" << int(f.bit);
                 },
                 [&](const CorePermanent& f) { out << "core core=" << f.core; },
                 [&](const ChannelBit& f) { out << "channel replica=" << f.replica << " bit=" << int(f.bit); },
             },
             target);
  std::visit(overloaded{
                 [&](const AtInstruction& t) { out << " @instr=" << t.count; },
                 [&](const AtEventIndex& t) { out << " @event=" << t.index; },
             },
             trigger);
  return out.str();
}

std::string_view to_string(OutcomeClass o) {
  switch (o) {
    case OutcomeClass::Masked: return "masked";
    case OutcomeClass::DetectedCorrected: return "detected_corrected";
    case OutcomeClass::DetectedUnrecoverable: return "detected_unrecoverable";
    case OutcomeClass::SDC: return "sdc";
    case OutcomeClass::Hang: return "hang";
  }
  return "?";
}

OutcomeClass parse_outcome(std::string_view text) {
  for (auto o : {OutcomeClass::Masked, OutcomeClass::DetectedCorrected, OutcomeClass::DetectedUnrecoverable,
                 OutcomeClass::SDC, OutcomeClass::Hang}) {
    if (to_string(o) == text) return o;
  }
  throw ConfigError("unknown outcome '" + std::string(text) + "'");
}

FaultEffect apply_fault(const FaultSpec& spec, FaultContext& ctx) {
  auto active_replica = [&](ReplicaId id) -> Replica* {
    if (id >= ctx.replicas.replicas().size()) return nullptr;
    Replica& r = ctx.replicas.replica(id);
    return r.active() ? &r : nullptr;
  };

  return std::visit(
      overloaded{
          [&](const RegisterBit& f) {
            Replica* r = active_replica(f.replica);
            if (r == nullptr) return FaultEffect::NotApplicable;
            r->state.regs[f.reg] ^= std::uint64_t{1} << f.bit;
            return FaultEffect::Applied;
          },
          [&](const MemoryBit& f) {
            Replica* r = active_replica(f.replica);
            if (r == nullptr) return FaultEffect::NotApplicable;
            MemoryRegion* region = r->space.find(f.page);
            if (region == nullptr) return FaultEffect::NotApplicable;
            if (ctx.ecc_memory) return FaultEffect::CorrectedByEcc;
            if (region->cow) {
              ctx.replicas.privatize_on_write(*r, f.page);
              region = r->space.find(f.page);
            }
            region->page_data(f.page)[f.byte] ^= static_cast<std::uint8_t>(1u << f.bit);
            return FaultEffect::Applied;
          },
          [&](const BackingBit& f) {
            Replica* r = active_replica(f.replica);
            if (r == nullptr) return FaultEffect::NotApplicable;
            MemoryRegion* region = r->space.find(f.page);
            if (region == nullptr) return FaultEffect::NotApplicable;
            if (ctx.ecc_memory) return FaultEffect::CorrectedByEcc;
            region->page_data(f.page)[f.byte] ^= static_cast<std::uint8_t>(1u << f.bit);
            return FaultEffect::Applied;
          },
          [&](const CorePermanent& f) {
            ctx.failed_cores.insert(f.core);
            return FaultEffect::Applied;
          },
          [&](const ChannelBit& f) {
            for (auto& ballot : ctx.ballots) {
              if (ballot.replica == f.replica && ballot.event) {
                ballot.event->digest.value ^= std::uint64_t{1} << f.bit;
                return FaultEffect::Applied;
              }
            }
            return FaultEffect::NotApplicable;
          },
      },
      spec.target);
}

}  // namespace rmt
