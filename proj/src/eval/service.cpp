#include "ssws/eval/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "httplib.h"
#include "ssws/util/keyvalue.hpp"

namespace ssws::eval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[i] = digits[v & 0xf];
  return out;
}

std::string utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

ServiceError bad_request(const std::string& what) { return ServiceError(400, what); }

std::string resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_absolute() ? p.string() : (base / p).string();
}

json flag_json(const mushra::ErrorFlag& f) {
  return json{{"system", f.system},
              {"category", mushra::to_string(f.category)},
              {"severity", mushra::to_string(f.severity)},
              {"note", f.note}};
}

}  // namespace

ServiceConfig load_service_config(const std::string& path) {
  auto kv = util::KeyValueFile::load(path);
  fs::path base = fs::path(path).parent_path();
  ServiceConfig c;
  c.host = kv.get_or("host", c.host);
  c.port = static_cast<int>(kv.get_int("port", c.port));
  if (kv.has("assignment")) c.assignment_path = resolve(base, kv.get("assignment"));
  c.audio_root = resolve(base, kv.get_or("audio_root", c.audio_root));
  c.log_path = resolve(base, kv.get_or("log", c.log_path));
  return c;
}

EvalService::EvalService(mushra::Assignment assignment, std::string log_path, std::string audio_root)
    : assignment_(std::move(assignment)), log_path_(std::move(log_path)), audio_root_(std::move(audio_root)) {
  for (std::size_t i = 0; i < assignment_.listeners.size(); ++i) {
    const auto& l = assignment_.listeners[i];
    listeners_[l.listener_id] = Listener{i, 0};
    for (std::size_t s = 0; s < l.screens.size(); ++s) {
      const auto& scr = l.screens[s];
      const auto& utt = assignment_.utterance(scr.utterance_id);
      for (std::size_t k = 0; k < scr.system_order.size(); ++k) {
        auto it = utt.audio.find(scr.system_order[k]);
        if (it == utt.audio.end())
          throw std::runtime_error("utterance " + scr.utterance_id + " has no audio for a listed system");
        audio_[token(i, s, k)] = resolve(audio_root_, it->second);
      }
    }
  }
  replay();
  fd_ = ::open(log_path_.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
  if (fd_ < 0) throw LogError("cannot open log " + log_path_ + ": " + std::strerror(errno));
}

EvalService::~EvalService() {
  if (fd_ >= 0) ::close(fd_);
}

const EvalService::Listener& EvalService::listener(const std::string& id) const {
  auto it = listeners_.find(id);
  if (it == listeners_.end()) throw ServiceError(404, "unknown listener '" + id + "'");
  return it->second;
}

std::string EvalService::screen_id(std::size_t listener_index, std::size_t screen) const {
  return hex16(fnv1a("screen|" + std::to_string(assignment_.plan.seed) + "|" +
                     assignment_.listeners[listener_index].listener_id + "|" + std::to_string(screen)));
}

std::string EvalService::slot_label(std::size_t slot) const {
  if (slot < 26) return std::string(1, static_cast<char>('A' + slot));
  return "S" + std::to_string(slot + 1);
}

std::string EvalService::token(std::size_t listener_index, std::size_t screen, std::size_t slot) const {
  return hex16(fnv1a("stimulus|" + std::to_string(assignment_.plan.seed) + "|" +
                     assignment_.listeners[listener_index].listener_id + "|" + std::to_string(screen) + "|" +
                     std::to_string(slot)));
}

json EvalService::next_screen(const std::string& listener_id) const {
  std::lock_guard lock(mutex_);
  const auto& l = listener(listener_id);
  const auto& la = assignment_.listeners[l.index];
  if (l.cursor >= la.screens.size()) return json{{"status", "done"}, {"total", la.screens.size()}};
  const auto& scr = la.screens[l.cursor];
  json slots = json::array();
  for (std::size_t k = 0; k < scr.system_order.size(); ++k)
    slots.push_back({{"slot", slot_label(k)}, {"audio", "/audio/" + token(l.index, l.cursor, k) + ".wav"}});
  return json{{"status", "screen"},
              {"screen_id", screen_id(l.index, l.cursor)},
              {"utterance_id", scr.utterance_id},
              {"index", l.cursor + 1},
              {"total", la.screens.size()},
              {"slots", slots}};
}

std::vector<mushra::ErrorFlag> EvalService::parse_flags(const Listener& l, std::size_t screen,
                                                        const json& flags) const {
  if (!flags.is_array() || flags.empty()) throw bad_request("flags must be a non-empty array");
  const auto& scr = assignment_.listeners[l.index].screens[screen];
  std::vector<mushra::ErrorFlag> out;
  for (const auto& f : flags) {
    if (!f.is_object()) throw bad_request("each flag must be an object");
    if (!f.contains("slot") || !f["slot"].is_string()) throw bad_request("flag without a slot");
    if (!f.contains("category") || !f["category"].is_string()) throw bad_request("flag without a category");
    if (!f.contains("severity") || !f["severity"].is_string()) throw bad_request("flag without a severity");
    std::string slot = f["slot"];
    std::size_t k = 0;
    while (k < scr.system_order.size() && slot_label(k) != slot) ++k;
    if (k == scr.system_order.size()) throw bad_request("unknown slot '" + slot + "'");
    mushra::ErrorFlag e;
    e.annotator_id = assignment_.listeners[l.index].listener_id;
    e.utterance_id = scr.utterance_id;
    e.system = scr.system_order[k];
    try {
      e.category = mushra::parse_category(f["category"]);
      e.severity = mushra::parse_severity(f["severity"]);
    } catch (const mushra::FlagError& err) {
      throw bad_request(err.what());
    }
    if (f.contains("note")) {
      if (!f["note"].is_string()) throw bad_request("flag note must be a string");
      e.note = f["note"];
    }
    out.push_back(e);
  }
  return out;
}

json EvalService::submit_ratings(const std::string& listener_id, const json& body) {
  std::lock_guard lock(mutex_);
  const auto& l = listener(listener_id);
  if (!body.is_object()) throw bad_request("body must be a JSON object");
  if (!body.contains("screen_id") || !body["screen_id"].is_string()) throw bad_request("missing screen_id");
  if (!body.contains("scores") || !body["scores"].is_object()) throw bad_request("missing scores object");
  const auto& la = assignment_.listeners[l.index];
  const std::string sid = body["screen_id"];
  for (std::size_t s = 0; s < l.cursor; ++s)
    if (screen_id(l.index, s) == sid) throw ServiceError(409, "screen already submitted");
  if (l.cursor >= la.screens.size() || screen_id(l.index, l.cursor) != sid)
    throw ServiceError(409, "screen is not the listener's current screen");

  const auto& scr = la.screens[l.cursor];
  const auto& scores = body["scores"];
  json rows = json::array();
  for (std::size_t k = 0; k < scr.system_order.size(); ++k) {
    auto label = slot_label(k);
    if (!scores.contains(label)) throw bad_request("slot " + label + " is not scored");
    const auto& v = scores[label];
    if (!v.is_number_integer()) throw bad_request("score for slot " + label + " is not an integer");
    auto score = v.get<long long>();
    if (score < 0 || score > 100) throw bad_request("score for slot " + label + " outside 0..100");
    rows.push_back({{"system", scr.system_order[k]}, {"score", score}});
  }
  if (scores.size() != scr.system_order.size()) throw bad_request("scores name an unknown slot");

  json flags = json::array();
  if (body.contains("flags"))
    for (const auto& f : parse_flags(l, l.cursor, body["flags"])) flags.push_back(flag_json(f));

  json record{{"type", "ratings"},        {"listener_id", listener_id}, {"screen_index", l.cursor},
              {"utterance_id", scr.utterance_id}, {"scores", rows},   {"flags", flags},
              {"timestamp", utc_now()}};
  append(record);
  apply(record);
  return json{{"status", "ok"}, {"ratings", rows.size()}, {"flags", flags.size()}};
}

std::size_t EvalService::screen_for_flags(const Listener& l, const json& body) const {
  if (!body.is_object()) throw bad_request("body must be a JSON object");
  if (!body.contains("screen_id") || !body["screen_id"].is_string()) throw bad_request("missing screen_id");
  const std::string sid = body["screen_id"];
  const auto limit = std::min(l.cursor + 1, assignment_.listeners[l.index].screens.size());
  for (std::size_t s = 0; s < limit; ++s)
    if (screen_id(l.index, s) == sid) return s;
  throw ServiceError(409, "screen has not been served to this listener");
}

json EvalService::submit_flags(const std::string& listener_id, const json& body) {
  std::lock_guard lock(mutex_);
  const auto& l = listener(listener_id);
  auto screen = screen_for_flags(l, body);
  if (!body.contains("flags")) throw bad_request("missing flags");
  json flags = json::array();
  for (const auto& f : parse_flags(l, screen, body["flags"])) flags.push_back(flag_json(f));
  json record{{"type", "flags"},
              {"listener_id", listener_id},
              {"screen_index", screen},
              {"utterance_id", assignment_.listeners[l.index].screens[screen].utterance_id},
              {"flags", flags},
              {"timestamp", utc_now()}};
  append(record);
  apply(record);
  return json{{"status", "ok"}, {"flags", flags.size()}};
}

void EvalService::apply(const json& record) {
  const std::string type = record.at("type");
  const std::string lid = record.at("listener_id");
  auto it = listeners_.find(lid);
  if (it == listeners_.end()) throw LogError("log names unknown listener " + lid);
  auto& l = it->second;
  const auto& la = assignment_.listeners[l.index];
  const std::size_t screen = record.at("screen_index");
  if (screen >= la.screens.size()) throw LogError("log screen index out of range for " + lid);
  const auto& scr = la.screens[screen];
  if (record.at("utterance_id") != scr.utterance_id) throw LogError("log utterance does not match the assignment");
  const auto& domain = assignment_.utterance(scr.utterance_id).domain;
  const std::string ts = record.at("timestamp");

  auto add_flags = [&](const json& flags) {
    for (const auto& f : flags) {
      const std::string sys = f.at("system");
      if (std::find(scr.system_order.begin(), scr.system_order.end(), sys) == scr.system_order.end())
        throw LogError("log flag names a system not on the screen");
      flags_.push_back({lid, scr.utterance_id, sys, mushra::parse_category(f.at("category")),
                        mushra::parse_severity(f.at("severity")), f.value("note", "")});
    }
  };

  if (type == "ratings") {
    if (screen != l.cursor) throw LogError("log ratings record out of order for " + lid);
    const auto& rows = record.at("scores");
    if (rows.size() != scr.system_order.size()) throw LogError("log ratings record has the wrong slot count");
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (rows[k].at("system") != scr.system_order[k]) throw LogError("log ratings record has the wrong slot order");
      int score = rows[k].at("score");
      if (score < 0 || score > 100) throw LogError("log score outside 0..100");
      ratings_.push_back({lid, scr.utterance_id, domain, scr.system_order[k], score, ts});
    }
    if (record.contains("flags")) add_flags(record["flags"]);
    ++l.cursor;
  } else if (type == "flags") {
    if (screen > l.cursor) throw LogError("log flags record for an unserved screen");
    add_flags(record.at("flags"));
  } else {
    throw LogError("unknown log record type '" + type + "'");
  }
}

void EvalService::replay() {
  std::ifstream in(log_path_, std::ios::binary);
  if (!in) return;
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  auto end = text.rfind('\n');
  std::size_t complete = end == std::string::npos ? 0 : end + 1;
  if (complete != text.size()) fs::resize_file(log_path_, complete);

  std::size_t pos = 0, line = 0;
  while (pos < complete) {
    auto nl = text.find('\n', pos);
    std::string s = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line;
    if (s.empty()) continue;
    try {
      apply(json::parse(s));
    } catch (const LogError& e) {
      throw LogError(log_path_ + ":" + std::to_string(line) + ": " + e.what());
    } catch (const std::exception& e) {
      throw LogError(log_path_ + ":" + std::to_string(line) + ": malformed record: " + e.what());
    }
  }
}

void EvalService::append(const json& record) {
  std::string line = record.dump() + "\n";
  const char* p = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    auto n = ::write(fd_, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("log write failed: ") + std::strerror(errno));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) throw std::runtime_error(std::string("log fsync failed: ") + std::strerror(errno));
}

std::string EvalService::export_ratings_csv() const {
  std::lock_guard lock(mutex_);
  return mushra::ratings_csv(ratings_);
}

std::string EvalService::export_flags_csv() const {
  std::lock_guard lock(mutex_);
  return mushra::flags_csv(flags_);
}

std::vector<mushra::Rating> EvalService::ratings() const {
  std::lock_guard lock(mutex_);
  return ratings_;
}

std::vector<mushra::ErrorFlag> EvalService::flags() const {
  std::lock_guard lock(mutex_);
  return flags_;
}

std::optional<std::string> EvalService::audio_path(const std::string& token) const {
  auto it = audio_.find(token);
  if (it == audio_.end()) return std::nullopt;
  return it->second;
}

void register_routes(httplib::Server& server, EvalService& service) {
  auto send_json = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  auto guarded = [send_json](auto handler) {
    return [send_json, handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const ServiceError& e) {
        send_json(res, e.status(), json{{"error", e.what()}});
      } catch (const json::exception& e) {
        send_json(res, 400, json{{"error", std::string("invalid JSON: ") + e.what()}});
      } catch (const std::exception& e) {
        send_json(res, 500, json{{"error", e.what()}});
      }
    };
  };

  server.Get(R"(/api/session/([^/]+)/next)", guarded([&service, send_json](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, service.next_screen(req.matches[1]));
             }));
  server.Post(R"(/api/session/([^/]+)/ratings)",
              guarded([&service, send_json](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, service.submit_ratings(req.matches[1], json::parse(req.body)));
              }));
  server.Post(R"(/api/session/([^/]+)/flags)",
              guarded([&service, send_json](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, service.submit_flags(req.matches[1], json::parse(req.body)));
              }));
  server.Get("/api/export/ratings.csv", guarded([&service](const httplib::Request&, httplib::Response& res) {
               res.set_content(service.export_ratings_csv(), "text/csv");
             }));
  server.Get("/api/export/flags.csv", guarded([&service](const httplib::Request&, httplib::Response& res) {
               res.set_content(service.export_flags_csv(), "text/csv");
             }));
  server.Get(R"(/audio/([0-9a-f]+)\.wav)", guarded([&service, send_json](const httplib::Request& req,
                                                                          httplib::Response& res) {
               auto path = service.audio_path(req.matches[1]);
               if (!path) throw ServiceError(404, "unknown stimulus");
               std::ifstream in(*path, std::ios::binary);
               if (!in) throw ServiceError(404, "stimulus audio missing");
               std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
               res.set_content(std::move(data), "audio/wav");
             }));
}

int serve(const ServiceConfig& config) {
  if (config.assignment_path.empty()) throw std::runtime_error("no assignment file configured");
  EvalService service(mushra::read_assignment(config.assignment_path), config.log_path, config.audio_root);
  httplib::Server server;
  register_routes(server, service);
  std::cerr << "listening on " << config.host << ":" << config.port << "\n";
  if (!server.listen(config.host, config.port))
    throw std::runtime_error("cannot listen on " + config.host + ":" + std::to_string(config.port));
  return 0;
}

}  // namespace ssws::eval
