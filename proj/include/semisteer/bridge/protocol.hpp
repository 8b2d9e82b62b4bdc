#pragma once

// JSON text messages exchanged over the live-session WebSocket.
// docs/wire_protocol.md is the field-by-field reference.

#include "semisteer/sim.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <variant>

namespace semisteer::bridge {

inline constexpr int kProtocolVersion = 1;

enum class SessionMode { simulated, live };

std::string to_string(SessionMode mode);
/// Accepts "simulated" and "live"; throws std::invalid_argument otherwise.
SessionMode parse_mode(const std::string& text);

struct OpenRequest {
  std::string scenario;                    ///< bundled scenario name, used when no document
  std::optional<nlohmann::json> document;  ///< inline scenario document
  SessionMode mode = SessionMode::live;
};

struct SteerRequest {
  double value = 0.0;
  bool normalized = false;  ///< value in [-1, 1] scaled by the steering limit
  std::optional<double> client_time_ms;
};

struct SpeedRequest {
  double v = 0.0;
};

struct StartRequest {};
struct StopRequest {};
struct ResetRequest {};

using Inbound =
    std::variant<OpenRequest, SteerRequest, SpeedRequest, StartRequest, StopRequest, ResetRequest>;

/// Parses one inbound text frame. Throws std::invalid_argument with a
/// diagnostic for malformed JSON, unknown types, missing or non-finite fields
/// and version mismatches.
Inbound parse_inbound(const std::string& text);

/// Outbound state for one control period.
struct StateMessage {
  int session_id = 0;
  int epoch = 0;  ///< incremented by every reset
  TickRecord record;
  double alpha = 1.0;
  bool intervention = false;
  int overruns = 0;
  bool running = false;
  bool finished = false;
  std::optional<double> client_time_ms;
};

nlohmann::json encode_state(const StateMessage& m);
StateMessage decode_state(const nlohmann::json& j);

nlohmann::json encode_error(const std::string& message);
nlohmann::json encode_status(int session_id, int epoch, int tick, bool running, bool finished);

}  // namespace semisteer::bridge
