// CSMA/CA link-layer models, with and without RTS/CTS virtual carrier
// sensing, built as process definitions.
#pragma once

#include <optional>

#include "linkalg/process.hpp"

namespace linkalg {

enum class Protocol { csma, csma_rts };

std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& s);

struct CsmaParams {
  std::int64_t cwmin = 2;
  std::optional<std::int64_t> max_retransmit = 2;  // nullopt: unbounded
  std::optional<std::int64_t> cwmax;               // nullopt: no cap
  TimeValue sifs = 1;
  TimeValue difs = 2;
  std::optional<TimeValue> max_cts_wait;  // default sifs + durCTS
  std::optional<TimeValue> max_ack_wait;  // default sifs + durAck
  DurationConfig durations;

  /// Throws ModelError when the constants are inconsistent.
  void validate() const;
  TimeValue cts_wait() const { return max_cts_wait.value_or(sifs + durations.cts); }
  TimeValue ack_wait() const { return max_ack_wait.value_or(sifs + durations.ack); }

  friend bool operator==(const CsmaParams&, const CsmaParams&) = default;
};

/// Contention window after `backoffexp` failed attempts.
std::int64_t cw_of(std::int64_t backoffexp, const CsmaParams& p);

/// Silence requested by an RTS for a data frame carrying `data`.
TimeValue rts_duration(Payload data, NodeId src, NodeId dest, const CsmaParams& p);

/// Entry process CSMA(myip).
DefsPtr build_csma_defs(const CsmaParams& p, const Universe& u);
/// Entry process CSMA_RTS(myip, nav).
DefsPtr build_csma_rts_defs(const CsmaParams& p, const Universe& u);

DefsPtr build_defs(Protocol proto, const CsmaParams& p, const Universe& u);
/// Initial local state of node `id` running `proto`.
ProcState csma_initial(Protocol proto, const ProcessDefs& defs, NodeId id);

}  // namespace linkalg
