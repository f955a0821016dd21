#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include "transientsynth/network.hpp"
#include "transientsynth/synthesis.hpp"

namespace tsynth {

inline constexpr std::uint16_t kDefaultPort = 7340;
inline constexpr std::size_t kPcmFrameBytes = 256;

struct ControlMessage {
  enum class Kind { set, ping, probe_on, probe_off };
  Kind kind = Kind::ping;
  Controls controls{};               // for set: new values, missing fields keep the current ones
  std::vector<std::string> clamped;  // names of fields that were pulled into [0,1]
};

struct MessageError {
  std::string message;
};

// Parses one text frame. Unknown fields are ignored.
std::variant<ControlMessage, MessageError> parse_control_message(std::string_view text, const Controls& current);

// 128 int16 samples -> 256 little-endian bytes.
std::string pcm_frame_bytes(const std::vector<std::int16_t>& pcm);

std::string pong_json();
std::string warn_json(const std::vector<std::string>& clamped);
std::string error_json(std::string_view message);
std::string act_json(int layer_label, const std::vector<float>& values);
std::string stats_json(std::uint64_t blocks, std::uint64_t dropped, std::uint64_t underruns);

struct ServerOptions {
  std::string address = "0.0.0.0";
  std::uint16_t port = kDefaultPort;  // 0 picks an ephemeral port
  std::uint64_t prime_seed = 0;
  std::size_t queue_capacity = 16;    // blocks buffered per connection before dropping
  std::chrono::milliseconds stats_interval{1000};
  std::optional<std::filesystem::path> static_dir;

  // Test mode: every connection plays `script` unpaced with a blocking queue,
  // then closes after `max_blocks`. The PCM stream is reproducible byte for byte.
  bool test_mode = false;
  std::optional<ControlSchedule> script;
  std::uint64_t max_blocks = 0;
};

class Server {
 public:
  Server(std::shared_ptr<const NetworkParams> params, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and serves on a background thread. Throws IoError if the bind fails.
  void start();
  // Binds and serves on the calling thread until SIGINT/SIGTERM.
  void run_until_signal();
  void stop();

  std::uint16_t port() const;
  int active_sessions() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tsynth
