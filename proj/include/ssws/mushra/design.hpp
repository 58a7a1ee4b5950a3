#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace ssws::mushra {

class DesignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PlanUtterance {
  std::string id;
  std::string domain;
  std::map<std::string, std::string> audio;  // system -> audio path
};

struct TestPlan {
  std::vector<PlanUtterance> utterances;
  std::vector<std::string> systems;
  std::size_t listeners = 0;
  std::size_t screens_per_listener = 0;
  std::size_t ratings_per_utterance = 0;
  std::uint64_t seed = 0;

  // Domains in order of first appearance.
  std::vector<std::string> domains() const;
  std::size_t domain_size(const std::string& domain) const;
};

// Tab-separated, header `utterance_id domain <system>...`; each system
// column holds that system's audio path for the utterance.
TestPlan read_plan(const std::string& path);
TestPlan parse_plan(const std::string& text);

// quota_d = screens_per_listener * |U_d| / |U|. Throws DesignError when a
// quota is not an integer.
std::map<std::string, std::size_t> domain_quota(const TestPlan& plan);

struct Screen {
  std::string utterance_id;
  std::vector<std::string> system_order;  // on-screen slot order
};

struct ListenerAssignment {
  std::string listener_id;
  std::vector<Screen> screens;
};

struct Assignment {
  TestPlan plan;
  std::vector<ListenerAssignment> listeners;

  const PlanUtterance& utterance(const std::string& id) const;
};

inline constexpr int kMaxDesignRetries = 1000;

// Seeded round-robin within each domain over ratings_per_utterance shuffled
// copies of the domain's utterances. A copy is reshuffled (up to
// kMaxDesignRetries times) when it would hand a listener the same utterance
// twice. Listener screen order and per-screen system order are shuffled too.
Assignment build_assignment(const TestPlan& plan);

// Every invariant violation, one sentence each. Empty when valid.
std::vector<std::string> validate_assignment(const Assignment& assignment);

// Checks a ratings table against the assignment: each (listener, screen)
// rated once per system, each utterance rated ratings_per_utterance times.
struct RatingKey {
  std::string listener_id;
  std::string utterance_id;
  std::string system;
};
std::vector<std::string> validate_ratings(const Assignment& assignment, const std::vector<RatingKey>& ratings);

nlohmann::json to_json(const Assignment& assignment);
Assignment assignment_from_json(const nlohmann::json& j);
void write_assignment(const std::string& path, const Assignment& assignment);
Assignment read_assignment(const std::string& path);

}  // namespace ssws::mushra
