#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "ssws/mushra/design.hpp"

using namespace ssws::mushra;

namespace {

TestPlan make_plan(const std::vector<std::size_t>& domain_sizes, std::size_t listeners, std::size_t screens,
                   std::size_t ratings, std::uint64_t seed = 1) {
  TestPlan p;
  p.systems = {"recording", "ssws", "hybrid", "spss"};
  for (std::size_t d = 0; d < domain_sizes.size(); ++d)
    for (std::size_t i = 0; i < domain_sizes[d]; ++i) {
      PlanUtterance u{"d" + std::to_string(d) + "_u" + std::to_string(i), "domain" + std::to_string(d), {}};
      for (const auto& s : p.systems) u.audio[s] = s + "/" + u.id + ".wav";
      p.utterances.push_back(u);
    }
  p.listeners = listeners;
  p.screens_per_listener = screens;
  p.ratings_per_utterance = ratings;
  p.seed = seed;
  return p;
}

const std::vector<std::size_t> kPaperDomains{25, 25, 25, 15, 25, 15, 35, 10, 25};

}  // namespace

TEST_CASE("paper domain quotas") {
  auto q = domain_quota(make_plan(kPaperDomains, 50, 40, 10));
  std::vector<std::size_t> expected{5, 5, 5, 3, 5, 3, 7, 2, 5};
  std::size_t total = 0;
  for (std::size_t d = 0; d < 9; ++d) {
    CHECK(q.at("domain" + std::to_string(d)) == expected[d]);
    total += q.at("domain" + std::to_string(d));
  }
  CHECK(total == 40);
}

TEST_CASE("quota edge cases") {
  CHECK(domain_quota(make_plan({12}, 3, 4, 1)).at("domain0") == 4);
  CHECK_THROWS_AS(domain_quota(make_plan({10, 10, 10}, 1, 7, 1)), DesignError);
}

TEST_CASE("paper configuration builds and validates") {
  auto plan = make_plan(kPaperDomains, 50, 40, 10, 7);
  auto a = build_assignment(plan);
  CHECK(validate_assignment(a).empty());
  REQUIRE(a.listeners.size() == 50);
  std::map<std::string, std::size_t> counts;
  for (const auto& l : a.listeners) {
    CHECK(l.screens.size() == 40);
    std::set<std::string> seen;
    for (const auto& s : l.screens) {
      CHECK(seen.insert(s.utterance_id).second);
      ++counts[s.utterance_id];
      CHECK(std::set<std::string>(s.system_order.begin(), s.system_order.end()).size() == 4);
    }
  }
  for (const auto& [id, n] : counts) CHECK(n == 10);
  CHECK(counts.size() == 200);
}

TEST_CASE("single listener gets every utterance once") {
  auto plan = make_plan({6}, 1, 6, 1);
  auto a = build_assignment(plan);
  CHECK(validate_assignment(a).empty());
  std::set<std::string> ids;
  for (const auto& s : a.listeners[0].screens) ids.insert(s.utterance_id);
  CHECK(ids.size() == 6);
}

TEST_CASE("blocks that straddle copies are still conflict free") {
  // 10 utterances, quota 4: listener blocks cross copy boundaries.
  auto plan = make_plan({10}, 5, 4, 2);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    plan.seed = seed;
    REQUIRE(validate_assignment(build_assignment(plan)).empty());
  }
  auto mixed = make_plan({6, 9}, 9, 5, 3);
  CHECK(validate_assignment(build_assignment(mixed)).empty());
}

TEST_CASE("infeasible plans are rejected") {
  CHECK_THROWS_AS(build_assignment(make_plan({5}, 3, 2, 2)), DesignError);            // 6 != 10
  CHECK_THROWS_AS(build_assignment(make_plan({10, 10, 10}, 10, 7, 1)), DesignError);  // quota 7/3
  CHECK_THROWS_AS(build_assignment(make_plan({3, 5}, 4, 4, 2)), DesignError);         // quota 1.5
  CHECK_THROWS_AS(build_assignment(make_plan({4}, 1, 8, 2)), DesignError);            // listener would repeat
}

TEST_CASE("design is deterministic per seed") {
  auto plan = make_plan({10, 10}, 10, 4, 2, 3);
  auto a = to_json(build_assignment(plan)).dump();
  CHECK(to_json(build_assignment(plan)).dump() == a);
  plan.seed = 4;
  CHECK(to_json(build_assignment(plan)).dump() != a);
}

TEST_CASE("validator names tampering") {
  auto plan = make_plan({8}, 4, 4, 2);
  auto a = build_assignment(plan);
  REQUIRE(validate_assignment(a).empty());

  auto dup = a;
  dup.listeners[0].screens[1].utterance_id = dup.listeners[0].screens[0].utterance_id;
  auto v = validate_assignment(dup);
  bool named = false;
  for (const auto& s : v) named |= s.find("more than once") != std::string::npos;
  CHECK(named);

  auto count = a;
  count.listeners[1].screens.pop_back();
  v = validate_assignment(count);
  bool rated = false;
  for (const auto& s : v) rated |= s.find("is rated 1 times, expected 2") != std::string::npos;
  CHECK(rated);

  auto order = a;
  order.listeners[2].screens[0].system_order.pop_back();
  CHECK_FALSE(validate_assignment(order).empty());
}

TEST_CASE("assignment json and plan file round trip") {
  auto a = build_assignment(make_plan({4, 4}, 4, 4, 2));
  auto path = (std::filesystem::temp_directory_path() / "ssws_assignment.json").string();
  write_assignment(path, a);
  auto b = read_assignment(path);
  CHECK(to_json(b) == to_json(a));
  CHECK(b.utterance("d1_u2").audio.at("ssws") == "ssws/d1_u2.wav");
  std::filesystem::remove(path);
  CHECK_THROWS_AS(assignment_from_json(nlohmann::json{{"format", "other"}}), DesignError);

  auto plan = parse_plan("# plan\nutterance_id\tdomain\trec\tsynth\nu1\tnews\ta.wav\tb.wav\nu2\tbooks\tc.wav\td.wav\n");
  CHECK(plan.systems == std::vector<std::string>{"rec", "synth"});
  CHECK(plan.utterances[1].audio.at("synth") == "d.wav");
  CHECK(plan.domains() == std::vector<std::string>{"news", "books"});
  CHECK_THROWS_AS(parse_plan("utterance_id\tdomain\tA\nu1\tx\ta\nu1\tx\tb\n"), DesignError);
}

TEST_CASE("ratings validation against the assignment") {
  auto a = build_assignment(make_plan({4}, 2, 4, 2));
  std::vector<RatingKey> keys;
  for (const auto& l : a.listeners)
    for (const auto& s : l.screens)
      for (const auto& sys : a.plan.systems) keys.push_back({l.listener_id, s.utterance_id, sys});
  CHECK(validate_ratings(a, keys).empty());
  keys.pop_back();
  CHECK_FALSE(validate_ratings(a, keys).empty());
  keys.push_back(keys.front());
  CHECK_FALSE(validate_ratings(a, keys).empty());
}
