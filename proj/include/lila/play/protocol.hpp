#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <nlohmann/json.hpp>

#include "lila/env/observe.hpp"

namespace lila::play {

// Messages are JSON text frames carrying {"v": version, "type": ...}.
//
// client -> server
//   {"type":"key","key":"Enter"|"Space"|"a"|"d"|"w"|"s"}
//   {"type":"start_episode","task_seed":n}     Enter with a chosen task (seed optional)
//   {"type":"set_mode","mode":"with-assistant"|"solo"}
//   {"type":"set_practice","practice":bool}
//   {"type":"set_debug","debug":bool}
//   {"type":"end_session"}
//
// server -> client
//   welcome, task_display, state_frame, episode_summary, session_end, rejected
inline constexpr int kProtocolVersion = 1;

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline nlohmann::json message(const std::string& type, nlohmann::json body = nlohmann::json::object()) {
  body["v"] = kProtocolVersion;
  body["type"] = type;
  return body;
}

inline std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<std::vector<std::uint8_t>::const_iterator, 6, 8>>;
  std::string out(It(bytes.begin()), It(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string text) {
  using namespace boost::archive::iterators;
  using It = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
  if (text.size() % 4 != 0) throw ProtocolError("base64: length is not a multiple of 4");
  const auto pad = text.size() >= 2 && text[text.size() - 2] == '=' ? 2 : (!text.empty() && text.back() == '=' ? 1 : 0);
  std::replace(text.end() - pad, text.end(), '=', 'A');
  std::vector<std::uint8_t> out;
  try {
    out.assign(It(text.cbegin()), It(text.cend()));
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("base64: ") + e.what());
  }
  out.resize(out.size() - pad);
  return out;
}

/// An agent's observation as sent on the wire: RGB bytes for pixel games,
/// one byte per bit for bit-vector games.
inline nlohmann::json encode_view(const env::WorldState& s, const env::TaskSpec& task, int agent) {
  if (task.spec.observation == env::ObservationMode::pixels)
    return {{"format", "rgb8"}, {"shape", {env::view_size(task.spec), env::view_size(task.spec), 3}},
            {"data", base64_encode(env::view_rgb8(s, task, agent))}};
  auto bits = env::encode_bits(s, task, agent);
  std::vector<std::uint8_t> bytes(bits.values().begin(), bits.values().end());
  return {{"format", "bits"}, {"shape", bits.shape()}, {"data", base64_encode(bytes)}};
}

inline env::Obs decode_view(const nlohmann::json& view) {
  const auto shape = view.at("shape").get<num::Shape>();
  const auto bytes = base64_decode(view.at("data").get<std::string>());
  env::Obs out(shape);
  if (bytes.size() != out.size()) throw ProtocolError("view: data does not match its shape");
  const std::string format = view.at("format");
  if (format == "rgb8") return env::rgb8_to_obs(bytes);
  if (format != "bits") throw ProtocolError("view: unknown format '" + format + "'");
  for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = bytes[i];
  return out;
}

/// Action index of a movement key, or -1.
inline int key_action(const std::string& key) {
  if (key == "Space") return static_cast<int>(env::Action::stay);
  if (key == "a") return static_cast<int>(env::Action::left);
  if (key == "d") return static_cast<int>(env::Action::right);
  if (key == "w") return static_cast<int>(env::Action::up);
  if (key == "s") return static_cast<int>(env::Action::down);
  return -1;
}

inline const char* action_key(int action) {
  static const char* keys[] = {"Space", "a", "d", "w", "s"};
  if (action < 0 || action >= env::kNumActions) throw std::out_of_range("action_key: bad action");
  return keys[action];
}

}  // namespace lila::play
