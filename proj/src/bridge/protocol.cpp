#include "semisteer/bridge/protocol.hpp"

#include <cmath>
#include <stdexcept>

namespace semisteer::bridge {

using nlohmann::json;

std::string to_string(SessionMode mode)
{
  return mode == SessionMode::simulated ? "simulated" : "live";
}

SessionMode parse_mode(const std::string& text)
{
  if (text == "simulated") return SessionMode::simulated;
  if (text == "live") return SessionMode::live;
  throw std::invalid_argument("unknown session mode '" + text + "'");
}

namespace {

double finite_number(const json& j, const char* key)
{
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw std::invalid_argument(std::string("field '") + key + "' must be a number");
  }
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string("field '") + key + "' must be finite");
  }
  return v;
}

}  // namespace

Inbound parse_inbound(const std::string& text)
{
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
    throw std::invalid_argument("message must be an object with a string 'type'");
  }
  if (j.contains("v") && j.at("v") != kProtocolVersion) {
    throw std::invalid_argument("unsupported protocol version " + j.at("v").dump());
  }
  const std::string type = j.at("type").get<std::string>();

  if (type == "open") {
    OpenRequest r;
    if (j.contains("scenario_json")) {
      r.document = j.at("scenario_json");
    } else if (j.contains("scenario") && j.at("scenario").is_string()) {
      r.scenario = j.at("scenario").get<std::string>();
    } else {
      throw std::invalid_argument("open needs 'scenario' (string) or 'scenario_json' (object)");
    }
    if (j.contains("mode")) {
      if (!j.at("mode").is_string()) throw std::invalid_argument("'mode' must be a string");
      r.mode = parse_mode(j.at("mode").get<std::string>());
    }
    return r;
  }
  if (type == "steer") {
    SteerRequest r;
    const bool rad = j.contains("delta_ref_rad");
    const bool norm = j.contains("normalized");
    if (rad == norm) {
      throw std::invalid_argument("steer needs exactly one of 'delta_ref_rad' and 'normalized'");
    }
    r.normalized = norm;
    r.value = finite_number(j, norm ? "normalized" : "delta_ref_rad");
    if (j.contains("client_time_ms") && !j.at("client_time_ms").is_null()) {
      r.client_time_ms = finite_number(j, "client_time_ms");
    }
    return r;
  }
  if (type == "set_speed") {
    SpeedRequest r;
    r.v = finite_number(j, "v_mps");
    if (r.v < 0.0) throw std::invalid_argument("'v_mps' must be non-negative");
    return r;
  }
  if (type == "start") return StartRequest{};
  if (type == "stop") return StopRequest{};
  if (type == "reset") return ResetRequest{};
  throw std::invalid_argument("unknown message type '" + type + "'");
}

json encode_state(const StateMessage& m)
{
  json j = tick_to_json(m.record, true);
  j["type"] = "state";
  j["v"] = kProtocolVersion;
  j["session_id"] = m.session_id;
  j["epoch"] = m.epoch;
  j["alpha"] = m.alpha;
  j["intervention"] = m.intervention;
  j["overruns"] = m.overruns;
  j["running"] = m.running;
  j["finished"] = m.finished;
  j["client_time_ms"] = m.client_time_ms ? json(*m.client_time_ms) : json(nullptr);
  return j;
}

StateMessage decode_state(const json& j)
{
  if (j.value("type", "") != "state") {
    throw std::invalid_argument("not a state message");
  }
  StateMessage m;
  m.session_id = j.at("session_id").get<int>();
  m.epoch = j.at("epoch").get<int>();
  m.record = tick_from_json(j);
  m.alpha = j.at("alpha").get<double>();
  m.intervention = j.at("intervention").get<bool>();
  m.overruns = j.at("overruns").get<int>();
  m.running = j.at("running").get<bool>();
  m.finished = j.at("finished").get<bool>();
  if (!j.at("client_time_ms").is_null()) {
    m.client_time_ms = j.at("client_time_ms").get<double>();
  }
  return m;
}

json encode_error(const std::string& message)
{
  return {{"type", "error"}, {"v", kProtocolVersion}, {"message", message}};
}

json encode_status(int session_id, int epoch, int tick, bool running, bool finished)
{
  return {{"type", "status"},  {"v", kProtocolVersion}, {"session_id", session_id},
          {"epoch", epoch},    {"tick", tick},          {"running", running},
          {"finished", finished}};
}

}  // namespace semisteer::bridge
