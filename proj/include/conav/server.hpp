#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "conav/bench.hpp"

namespace conav {

inline constexpr int kProtocolVersion = 1;

struct ServerOptions {
  std::filesystem::path log_dir;  ///< per-session JSON logs; empty disables
};

/// Wire protocol v1 for the sessions of one client connection. Every call
/// takes one inbound JSON message and returns the outbound messages in
/// order. Not thread-safe: a hub belongs to exactly one connection.
class SessionHub {
 public:
  explicit SessionHub(ServerOptions options = {});
  ~SessionHub();

  std::vector<std::string> handle(const std::string& message);

  /// Closes every open session as disconnected and writes its log.
  void disconnect();

  std::size_t open_sessions() const;
  /// Log of a session (open or finished) as JSON text.
  std::string session_log(const std::string& id) const;
  std::vector<std::string> session_ids() const;

 private:
  struct Session;
  struct Outbox;

  void create_session(const std::string& text_config, Outbox& out);
  void advance(Session& s, Outbox& out);
  void close(Session& s, const std::string& status);

  ServerOptions options_;
  std::map<std::string, std::unique_ptr<Session>> sessions_;
  long long seq_ = 0;
};

/// Re-runs a session log's recorded operator inputs through the episode
/// runner. Returns the replayed metrics; `logged` receives the metrics that
/// were recorded live.
EpisodeMetrics replay_session_log(const std::string& log_text, EpisodeMetrics* logged = nullptr,
                                  const PerceptionModel* model = nullptr);

/// Websocket server on `port` (0 picks a free one). Blocks until `stop`
/// becomes true; `on_listen` receives the bound port.
void serve(unsigned short port, const ServerOptions& options, const std::atomic<bool>& stop,
           const std::function<void(unsigned short)>& on_listen = {});

}  // namespace conav
