#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "ssws/eval/service.hpp"
#include "ssws/mushra/annotation.hpp"
#include "ssws/mushra/stats.hpp"

using namespace ssws;
using nlohmann::json;

namespace {

const std::vector<std::string> kSystems{"recording", "ssws", "hybrid", "spss"};

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("ssws_service_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)) + "_" +
            std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

mushra::Assignment small_assignment(std::uint64_t seed = 5) {
  mushra::TestPlan p;
  p.systems = kSystems;
  for (int d = 0; d < 2; ++d)
    for (int i = 0; i < 4; ++i) {
      mushra::PlanUtterance u{"d" + std::to_string(d) + "_u" + std::to_string(i), d == 0 ? "news" : "books", {}};
      for (const auto& s : p.systems) u.audio[s] = s + "/" + u.id + ".wav";
      p.utterances.push_back(u);
    }
  p.listeners = 4;
  p.screens_per_listener = 4;
  p.ratings_per_utterance = 2;
  p.seed = seed;
  return mushra::build_assignment(p);
}

json scores_body(const json& screen, const std::vector<int>& scores) {
  json s = json::object();
  for (std::size_t i = 0; i < screen["slots"].size(); ++i) s[screen["slots"][i]["slot"].get<std::string>()] = scores[i];
  return json{{"screen_id", screen["screen_id"]}, {"scores", s}};
}

int error_status(const std::function<void()>& f) {
  try {
    f();
  } catch (const eval::ServiceError& e) {
    return e.status();
  }
  return 0;
}

bool mentions_system(const std::string& body) {
  for (const auto& s : kSystems)
    if (body.find(s) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("next screen is served in assignment order and is idempotent") {
  TempDir dir;
  auto a = small_assignment();
  eval::EvalService svc(a, dir.file("log.jsonl"));
  auto first = svc.next_screen("L001");
  CHECK(first["status"] == "screen");
  CHECK(first["index"] == 1);
  CHECK(first["total"] == 4);
  CHECK(first["utterance_id"] == a.listeners[0].screens[0].utterance_id);
  CHECK(first["slots"].size() == 4);
  CHECK(svc.next_screen("L001") == first);
  CHECK(error_status([&] { svc.next_screen("L999"); }) == 404);
  CHECK_FALSE(mentions_system(first.dump()));
}

TEST_CASE("slot scores map back through the screen's system order") {
  TempDir dir;
  auto a = small_assignment();
  eval::EvalService svc(a, dir.file("log.jsonl"));
  auto screen = svc.next_screen("L002");
  svc.submit_ratings("L002", scores_body(screen, {10, 20, 30, 40}));
  auto rows = mushra::parse_ratings_csv(svc.export_ratings_csv());
  REQUIRE(rows.size() == 4);
  const auto& expected = a.listeners[1].screens[0];
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(rows[i].listener_id == "L002");
    CHECK(rows[i].utterance_id == expected.utterance_id);
    CHECK(rows[i].system == expected.system_order[i]);
    CHECK(rows[i].score == static_cast<int>(10 * (i + 1)));
    CHECK(rows[i].domain == a.utterance(expected.utterance_id).domain);
  }
  auto next = svc.next_screen("L002");
  CHECK(next["index"] == 2);
  CHECK(next["screen_id"] != screen["screen_id"]);
}

TEST_CASE("rating submissions are validated") {
  TempDir dir;
  eval::EvalService svc(small_assignment(), dir.file("log.jsonl"));
  auto screen = svc.next_screen("L001");

  CHECK(error_status([&] { svc.submit_ratings("L001", scores_body(screen, {10, 20, 30, 101})); }) == 400);
  CHECK(error_status([&] { svc.submit_ratings("L001", scores_body(screen, {-1, 20, 30, 40})); }) == 400);
  auto missing = scores_body(screen, {1, 2, 3, 4});
  missing["scores"].erase(screen["slots"][2]["slot"].get<std::string>());
  CHECK(error_status([&] { svc.submit_ratings("L001", missing); }) == 400);
  auto extra = scores_body(screen, {1, 2, 3, 4});
  extra["scores"]["Z"] = 5;
  CHECK(error_status([&] { svc.submit_ratings("L001", extra); }) == 400);
  auto fractional = scores_body(screen, {1, 2, 3, 4});
  fractional["scores"][screen["slots"][0]["slot"].get<std::string>()] = 50.5;
  CHECK(error_status([&] { svc.submit_ratings("L001", fractional); }) == 400);
  CHECK(error_status([&] { svc.submit_ratings("L001", json{{"scores", json::object()}}); }) == 400);
  CHECK(error_status([&] { svc.submit_ratings("L999", scores_body(screen, {1, 2, 3, 4})); }) == 404);
  auto wrong = scores_body(screen, {1, 2, 3, 4});
  wrong["screen_id"] = "nope";
  CHECK(error_status([&] { svc.submit_ratings("L001", wrong); }) == 409);

  CHECK(mushra::parse_ratings_csv(svc.export_ratings_csv()).empty());
  svc.submit_ratings("L001", scores_body(screen, {0, 100, 50, 50}));
  CHECK(error_status([&] { svc.submit_ratings("L001", scores_body(screen, {0, 100, 50, 50})); }) == 409);
  CHECK(mushra::parse_ratings_csv(svc.export_ratings_csv()).size() == 4);
}

TEST_CASE("flags are mapped to systems and exported") {
  TempDir dir;
  auto a = small_assignment();
  eval::EvalService svc(a, dir.file("log.jsonl"));
  CHECK(svc.export_flags_csv() == mushra::flags_csv({}));
  CHECK(svc.export_ratings_csv() == mushra::ratings_csv({}));

  auto screen = svc.next_screen("L003");
  const std::string slot = screen["slots"][1]["slot"];
  svc.submit_flags("L003", json{{"screen_id", screen["screen_id"]},
                                {"flags", {{{"slot", slot}, {"category", "audio glitch"}, {"severity", "critical"},
                                            {"note", "click"}}}}});
  auto flags = mushra::parse_flags_csv(svc.export_flags_csv());
  REQUIRE(flags.size() == 1);
  CHECK(flags[0].annotator_id == "L003");
  CHECK(flags[0].utterance_id == a.listeners[2].screens[0].utterance_id);
  CHECK(flags[0].system == a.listeners[2].screens[0].system_order[1]);
  CHECK(flags[0].category == mushra::Category::AudioGlitch);
  CHECK(flags[0].severity == mushra::Severity::Critical);

  auto bad = [&](json f) {
    return error_status([&] { svc.submit_flags("L003", json{{"screen_id", screen["screen_id"]}, {"flags", {f}}}); });
  };
  CHECK(bad({{"slot", slot}, {"category", "clipping"}, {"severity", "minor"}}) == 400);
  CHECK(bad({{"slot", slot}, {"category", "stress"}, {"severity", "huge"}}) == 400);
  CHECK(bad({{"slot", "Q"}, {"category", "stress"}, {"severity", "minor"}}) == 400);
  CHECK(error_status([&] { svc.submit_flags("L003", json{{"screen_id", screen["screen_id"]}, {"flags", json::array()}}); }) ==
        400);
  CHECK(mushra::parse_flags_csv(svc.export_flags_csv()).size() == 1);

  // Flags may accompany the ratings and may follow them for the same screen.
  auto body = scores_body(screen, {90, 80, 70, 60});
  body["flags"] = {{{"slot", slot}, {"category", "stress"}, {"severity", "minor"}, {"note", ""}}};
  svc.submit_ratings("L003", body);
  svc.submit_flags("L003", json{{"screen_id", screen["screen_id"]},
                                {"flags", {{{"slot", slot}, {"category", "other"}, {"severity", "medium"}}}}});
  CHECK(mushra::parse_flags_csv(svc.export_flags_csv()).size() == 3);
  auto later = svc.next_screen("L003");
  CHECK(error_status([&] {
          svc.submit_flags("L003", json{{"screen_id", "unknown"},
                                        {"flags", {{{"slot", slot}, {"category", "other"}, {"severity", "medium"}}}}});
        }) == 409);
  (void)later;
}

TEST_CASE("acknowledged writes survive restart") {
  TempDir dir;
  auto a = small_assignment();
  std::string ratings, flags;
  json pending;
  {
    eval::EvalService svc(a, dir.file("log.jsonl"));
    for (int k = 0; k < 3; ++k) {
      auto s = svc.next_screen("L001");
      svc.submit_ratings("L001", scores_body(s, {k, k + 1, k + 2, k + 3}));
    }
    auto s = svc.next_screen("L004");
    svc.submit_flags("L004", json{{"screen_id", s["screen_id"]},
                                  {"flags", {{{"slot", s["slots"][0]["slot"]}, {"category", "pronunciation"},
                                              {"severity", "minor"}, {"note", "a \"b\", c"}}}}});
    ratings = svc.export_ratings_csv();
    flags = svc.export_flags_csv();
    pending = svc.next_screen("L001");
  }
  eval::EvalService again(a, dir.file("log.jsonl"));
  CHECK(again.export_ratings_csv() == ratings);
  CHECK(again.export_flags_csv() == flags);
  CHECK(again.next_screen("L001") == pending);
  CHECK(again.next_screen("L001")["index"] == 4);
}

TEST_CASE("replay drops a torn final record and rejects corruption") {
  TempDir dir;
  auto a = small_assignment();
  {
    eval::EvalService svc(a, dir.file("log.jsonl"));
    svc.submit_ratings("L001", scores_body(svc.next_screen("L001"), {1, 2, 3, 4}));
  }
  {
    std::ofstream out(dir.file("log.jsonl"), std::ios::app);
    out << "{\"type\":\"ratings\",\"listen";
  }
  {
    eval::EvalService svc(a, dir.file("log.jsonl"));
    CHECK(mushra::parse_ratings_csv(svc.export_ratings_csv()).size() == 4);
    svc.submit_ratings("L001", scores_body(svc.next_screen("L001"), {1, 2, 3, 4}));
  }
  eval::EvalService svc(a, dir.file("log.jsonl"));
  CHECK(mushra::parse_ratings_csv(svc.export_ratings_csv()).size() == 8);

  {
    std::ofstream out(dir.file("bad.jsonl"));
    out << "not json\n";
  }
  CHECK_THROWS_AS(eval::EvalService(a, dir.file("bad.jsonl")), eval::LogError);
  {
    std::ofstream out(dir.file("other.jsonl"));
    out << json{{"type", "ratings"}, {"listener_id", "L001"}, {"screen_index", 3}}.dump() << "\n";
  }
  CHECK_THROWS_AS(eval::EvalService(a, dir.file("other.jsonl")), eval::LogError);
}

TEST_CASE("completed study satisfies the assignment's counting invariants") {
  TempDir dir;
  auto a = small_assignment();
  eval::EvalService svc(a, dir.file("log.jsonl"));
  std::size_t submissions = 0;
  for (const auto& l : a.listeners)
    while (true) {
      auto s = svc.next_screen(l.listener_id);
      if (s["status"] == "done") break;
      svc.submit_ratings(l.listener_id, scores_body(s, {50, 60, 70, 80}));
      ++submissions;
    }
  auto rows = mushra::parse_ratings_csv(svc.export_ratings_csv());
  CHECK(rows.size() == 4 * submissions);
  std::vector<mushra::RatingKey> keys;
  for (const auto& r : rows) keys.push_back({r.listener_id, r.utterance_id, r.system});
  CHECK(mushra::validate_ratings(a, keys).empty());
  auto done = svc.next_screen("L001");
  CHECK(done["status"] == "done");
  CHECK(done["total"] == 4);
}

TEST_CASE("concurrent listeners") {
  TempDir dir;
  auto a = small_assignment();
  eval::EvalService svc(a, dir.file("log.jsonl"));
  std::vector<std::thread> threads;
  for (const auto& l : a.listeners)
    threads.emplace_back([&svc, id = l.listener_id] {
      for (;;) {
        auto s = svc.next_screen(id);
        if (s["status"] == "done") break;
        svc.submit_ratings(id, scores_body(s, {1, 2, 3, 4}));
      }
    });
  for (auto& t : threads) t.join();
  CHECK(mushra::parse_ratings_csv(svc.export_ratings_csv()).size() == 64);
  eval::EvalService again(a, dir.file("log.jsonl"));
  CHECK(again.export_ratings_csv() == svc.export_ratings_csv());
}

TEST_CASE("service config file with overrides") {
  TempDir dir;
  {
    std::ofstream out(dir.file("svc.cfg"));
    out << "# service\nport = 9001\nassignment = a.json\naudio_root = audio\nlog = ratings.jsonl\n";
  }
  auto c = eval::load_service_config(dir.file("svc.cfg"));
  CHECK(c.port == 9001);
  CHECK(c.assignment_path == (dir.path / "a.json").string());
  CHECK(c.audio_root == (dir.path / "audio").string());
  CHECK(c.log_path == (dir.path / "ratings.jsonl").string());
  CHECK(c.host == "127.0.0.1");
}

TEST_CASE("http api round trip with blinding") {
  TempDir dir;
  auto a = small_assignment();
  for (const auto& u : a.plan.utterances)
    for (const auto& [sys, rel] : u.audio) {
      auto p = dir.path / "audio" / rel;
      std::filesystem::create_directories(p.parent_path());
      std::ofstream(p, std::ios::binary) << "RIFF" << sys << "|" << u.id;
    }
  eval::EvalService svc(a, dir.file("log.jsonl"), (dir.path / "audio").string());
  httplib::Server server;
  eval::register_routes(server, svc);
  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  std::vector<std::string> bodies;
  auto get = [&](const std::string& path) {
    auto r = cli.Get(path);
    REQUIRE(r);
    bodies.push_back(r->body);
    return r;
  };
  auto post = [&](const std::string& path, const json& body) {
    auto r = cli.Post(path, body.dump(), "application/json");
    REQUIRE(r);
    bodies.push_back(r->body);
    return r;
  };

  auto r = get("/api/session/L001/next");
  CHECK(r->status == 200);
  auto screen = json::parse(r->body);
  CHECK(screen["index"] == 1);

  std::set<std::string> served;
  for (std::size_t i = 0; i < 4; ++i) {
    std::string url = screen["slots"][i]["audio"];
    auto audio = cli.Get(url);
    REQUIRE(audio);
    CHECK(audio->status == 200);
    CHECK(audio->get_header_value("Content-Type") == "audio/wav");
    const auto& scr = a.listeners[0].screens[0];
    CHECK(audio->body == "RIFF" + scr.system_order[i] + "|" + scr.utterance_id);
    served.insert(url);
  }
  CHECK(served.size() == 4);
  CHECK(get("/audio/0000000000000000.wav")->status == 404);

  CHECK(post("/api/session/L001/ratings", scores_body(screen, {5, 6, 7, 101}))->status == 400);
  CHECK(post("/api/session/L001/ratings", json("not an object"))->status == 400);
  auto bad = cli.Post("/api/session/L001/ratings", "{oops", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(post("/api/session/L001/ratings", scores_body(screen, {5, 6, 7, 8}))->status == 200);
  CHECK(post("/api/session/L001/ratings", scores_body(screen, {5, 6, 7, 8}))->status == 409);
  CHECK(get("/api/session/L077/next")->status == 404);
  CHECK(post("/api/session/L001/flags",
             json{{"screen_id", screen["screen_id"]},
                  {"flags", {{{"slot", screen["slots"][3]["slot"]}, {"category", "incorrect pitch insertion"},
                              {"severity", "medium"}}}}})
            ->status == 200);

  auto ratings = cli.Get("/api/export/ratings.csv");
  REQUIRE(ratings);
  CHECK(ratings->status == 200);
  CHECK(ratings->get_header_value("Content-Type").rfind("text/csv", 0) == 0);
  CHECK(mushra::parse_ratings_csv(ratings->body).size() == 4);
  auto flags = cli.Get("/api/export/flags.csv");
  REQUIRE(flags);
  auto parsed = mushra::parse_flags_csv(flags->body);
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0].category == mushra::Category::PitchAccent);
  CHECK(parsed[0].system == a.listeners[0].screens[0].system_order[3]);

  server.stop();
  th.join();

  // Exports are the analysis side; every listener-facing response stays blind.
  for (const auto& b : bodies) CHECK_FALSE(mentions_system(b));
}
