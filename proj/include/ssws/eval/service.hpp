#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "ssws/mushra/annotation.hpp"
#include "ssws/mushra/design.hpp"
#include "ssws/mushra/stats.hpp"

namespace httplib {
class Server;
}

namespace ssws::eval {

// Carries the HTTP status the route layer answers with: 400 invalid input,
// 404 unknown listener or stimulus, 409 stale or repeated screen.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

class LogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string assignment_path;
  std::string audio_root = ".";
  std::string log_path = "ratings.jsonl";
};

// Keys: host, port, assignment, audio_root, log. Relative paths resolve
// against the config file's directory.
ServiceConfig load_service_config(const std::string& path);

// Serves one assignment. Every acknowledged write is one JSON line in the
// log, flushed and fsynced before the call returns; the log is replayed on
// construction. A final line without a newline is treated as never
// acknowledged and cut off.
class EvalService {
 public:
  EvalService(mushra::Assignment assignment, std::string log_path, std::string audio_root = ".");
  ~EvalService();
  EvalService(const EvalService&) = delete;
  EvalService& operator=(const EvalService&) = delete;

  // {"status":"screen", screen_id, utterance_id, index (1-based), total,
  //  slots:[{slot, audio}]} or {"status":"done", total}.
  nlohmann::json next_screen(const std::string& listener_id) const;

  // Body: {screen_id, scores:{slot:int}, flags?:[...]}.
  nlohmann::json submit_ratings(const std::string& listener_id, const nlohmann::json& body);
  // Body: {screen_id, flags:[{slot, category, severity, note?}]}. The screen
  // must be the current one or one the listener already completed.
  nlohmann::json submit_flags(const std::string& listener_id, const nlohmann::json& body);

  std::string export_ratings_csv() const;
  std::string export_flags_csv() const;
  std::vector<mushra::Rating> ratings() const;
  std::vector<mushra::ErrorFlag> flags() const;

  // Filesystem path for a stimulus token, if known.
  std::optional<std::string> audio_path(const std::string& token) const;

  const mushra::Assignment& assignment() const { return assignment_; }

 private:
  struct Listener {
    std::size_t index = 0;  // into assignment_.listeners
    std::size_t cursor = 0;
  };

  const Listener& listener(const std::string& id) const;
  std::string screen_id(std::size_t listener_index, std::size_t screen) const;
  std::string slot_label(std::size_t slot) const;
  std::string token(std::size_t listener_index, std::size_t screen, std::size_t slot) const;
  std::size_t screen_for_flags(const Listener& l, const nlohmann::json& body) const;
  std::vector<mushra::ErrorFlag> parse_flags(const Listener& l, std::size_t screen, const nlohmann::json& flags) const;

  void replay();
  void apply(const nlohmann::json& record);
  void append(const nlohmann::json& record);

  mushra::Assignment assignment_;
  std::string log_path_;
  std::string audio_root_;
  int fd_ = -1;
  std::map<std::string, Listener> listeners_;
  std::map<std::string, std::string> audio_;  // token -> path
  std::vector<mushra::Rating> ratings_;
  std::vector<mushra::ErrorFlag> flags_;
  mutable std::mutex mutex_;
};

void register_routes(httplib::Server& server, EvalService& service);

// Blocks until the server stops.
int serve(const ServiceConfig& config);

}  // namespace ssws::eval
