#include "ssws/mushra/design.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "ssws/util/csv.hpp"

namespace ssws::mushra {

using nlohmann::json;

std::vector<std::string> TestPlan::domains() const {
  std::vector<std::string> out;
  for (const auto& u : utterances)
    if (std::find(out.begin(), out.end(), u.domain) == out.end()) out.push_back(u.domain);
  return out;
}

std::size_t TestPlan::domain_size(const std::string& domain) const {
  return static_cast<std::size_t>(
      std::count_if(utterances.begin(), utterances.end(), [&](const auto& u) { return u.domain == domain; }));
}

TestPlan parse_plan(const std::string& text) {
  std::istringstream in(text);
  auto rows = util::read_csv(in, '\t');
  rows.erase(std::remove_if(rows.begin(), rows.end(),
                            [](const util::CsvRow& r) {
                              return r.empty() || (r.size() == 1 && r[0].empty()) || r[0].rfind("#", 0) == 0;
                            }),
             rows.end());
  if (rows.empty()) throw DesignError("plan is empty");
  const auto& header = rows.front();
  const auto id_col = util::column_index(header, "utterance_id");
  const auto domain_col = util::column_index(header, "domain");
  TestPlan plan;
  std::vector<std::size_t> system_cols;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != id_col && c != domain_col) {
      plan.systems.push_back(header[c]);
      system_cols.push_back(c);
    }
  std::set<std::string> seen;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != header.size())
      throw DesignError("plan row " + std::to_string(i + 1) + " has " + std::to_string(r.size()) + " fields, expected " +
                        std::to_string(header.size()));
    PlanUtterance u{r[id_col], r[domain_col], {}};
    if (!seen.insert(u.id).second) throw DesignError("plan lists utterance " + u.id + " twice");
    for (std::size_t k = 0; k < system_cols.size(); ++k) u.audio[plan.systems[k]] = r[system_cols[k]];
    plan.utterances.push_back(std::move(u));
  }
  return plan;
}

TestPlan read_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DesignError("cannot open plan " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_plan(ss.str());
}

std::map<std::string, std::size_t> domain_quota(const TestPlan& plan) {
  if (plan.utterances.empty()) throw DesignError("plan has no utterances");
  const std::size_t total = plan.utterances.size();
  std::map<std::string, std::size_t> quota;
  for (const auto& d : plan.domains()) {
    const std::size_t n = plan.domain_size(d);
    const std::size_t num = plan.screens_per_listener * n;
    if (num % total != 0)
      throw DesignError("domain " + d + ": quota " + std::to_string(plan.screens_per_listener) + " x " +
                        std::to_string(n) + " / " + std::to_string(total) + " is not an integer (remainder " +
                        std::to_string(num % total) + ")");
    quota[d] = num / total;
  }
  return quota;
}

const PlanUtterance& Assignment::utterance(const std::string& id) const {
  for (const auto& u : plan.utterances)
    if (u.id == id) return u;
  throw DesignError("unknown utterance " + id);
}

namespace {

void check_feasible(const TestPlan& plan) {
  if (plan.utterances.empty()) throw DesignError("infeasible plan: no utterances");
  if (plan.systems.size() < 2) throw DesignError("infeasible plan: at least two systems are needed per screen");
  if (plan.listeners < 1 || plan.screens_per_listener < 1 || plan.ratings_per_utterance < 1)
    throw DesignError("infeasible plan: listeners, screens and ratings must all be positive");
  const std::size_t slots = plan.listeners * plan.screens_per_listener;
  const std::size_t needed = plan.utterances.size() * plan.ratings_per_utterance;
  if (slots != needed)
    throw DesignError("infeasible plan: " + std::to_string(plan.listeners) + " listeners x " +
                      std::to_string(plan.screens_per_listener) + " screens = " + std::to_string(slots) + " but " +
                      std::to_string(plan.utterances.size()) + " utterances x " +
                      std::to_string(plan.ratings_per_utterance) + " ratings = " + std::to_string(needed));
}

std::string listener_name(std::size_t i, std::size_t count) {
  std::string digits = std::to_string(count);
  std::string n = std::to_string(i + 1);
  const std::size_t width = std::max<std::size_t>(3, digits.size());
  return "L" + std::string(width - std::min(width, n.size()), '0') + n;
}

}  // namespace

Assignment build_assignment(const TestPlan& plan) {
  check_feasible(plan);
  const auto quota = domain_quota(plan);
  for (const auto& [d, q] : quota)
    if (q > plan.domain_size(d))
      throw DesignError("infeasible plan: domain " + d + " needs " + std::to_string(q) +
                        " screens per listener but has only " + std::to_string(plan.domain_size(d)) + " utterances");

  std::mt19937_64 rng(plan.seed);
  Assignment a;
  a.plan = plan;
  a.listeners.resize(plan.listeners);
  for (std::size_t l = 0; l < plan.listeners; ++l) a.listeners[l].listener_id = listener_name(l, plan.listeners);

  for (const auto& domain : plan.domains()) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < plan.utterances.size(); ++i)
      if (plan.utterances[i].domain == domain) members.push_back(i);
    const std::size_t q = quota.at(domain);
    if (q == 0) continue;

    std::vector<std::size_t> sequence;
    for (std::size_t copy = 0; copy < plan.ratings_per_utterance; ++copy) {
      const std::size_t start = sequence.size();
      const std::size_t block_start = start / q * q;
      std::vector<std::size_t> next = members;
      int attempt = 0;
      for (;; ++attempt) {
        if (attempt == kMaxDesignRetries)
          throw DesignError("domain " + domain + ": no conflict-free shuffle after " +
                            std::to_string(kMaxDesignRetries) + " attempts (seed " + std::to_string(plan.seed) + ")");
        std::shuffle(next.begin(), next.end(), rng);
        if (block_start == start) break;
        const std::set<std::size_t> tail(sequence.begin() + static_cast<std::ptrdiff_t>(block_start), sequence.end());
        const std::size_t head = block_start + q - start;
        if (std::none_of(next.begin(), next.begin() + static_cast<std::ptrdiff_t>(head),
                         [&](std::size_t u) { return tail.count(u) != 0; }))
          break;
      }
      sequence.insert(sequence.end(), next.begin(), next.end());
    }
    for (std::size_t l = 0; l < plan.listeners; ++l)
      for (std::size_t k = 0; k < q; ++k)
        a.listeners[l].screens.push_back({plan.utterances[sequence[l * q + k]].id, {}});
  }

  for (auto& listener : a.listeners) {
    std::shuffle(listener.screens.begin(), listener.screens.end(), rng);
    for (auto& screen : listener.screens) {
      screen.system_order = plan.systems;
      std::shuffle(screen.system_order.begin(), screen.system_order.end(), rng);
    }
  }
  return a;
}

std::vector<std::string> validate_assignment(const Assignment& a) {
  std::vector<std::string> v;
  const auto& plan = a.plan;
  if (plan.listeners * plan.screens_per_listener != plan.utterances.size() * plan.ratings_per_utterance)
    v.push_back("count identity fails: listeners x screens differs from utterances x ratings");
  if (a.listeners.size() != plan.listeners)
    v.push_back("assignment has " + std::to_string(a.listeners.size()) + " listeners, plan has " +
                std::to_string(plan.listeners));

  std::map<std::string, std::string> domain_of;
  for (const auto& u : plan.utterances) domain_of[u.id] = u.domain;
  std::map<std::string, std::size_t> quota;
  try {
    quota = domain_quota(plan);
  } catch (const DesignError& e) {
    v.push_back(e.what());
  }
  const std::set<std::string> systems(plan.systems.begin(), plan.systems.end());

  std::map<std::string, std::size_t> ratings;
  std::set<std::string> listener_ids;
  for (const auto& l : a.listeners) {
    if (!listener_ids.insert(l.listener_id).second) v.push_back("listener id " + l.listener_id + " appears twice");
    if (l.screens.size() != plan.screens_per_listener)
      v.push_back("listener " + l.listener_id + " has " + std::to_string(l.screens.size()) + " screens, expected " +
                  std::to_string(plan.screens_per_listener));
    std::set<std::string> seen;
    std::map<std::string, std::size_t> per_domain;
    for (std::size_t s = 0; s < l.screens.size(); ++s) {
      const auto& screen = l.screens[s];
      auto it = domain_of.find(screen.utterance_id);
      if (it == domain_of.end()) {
        v.push_back("listener " + l.listener_id + " screen " + std::to_string(s + 1) + " names unknown utterance " +
                    screen.utterance_id);
        continue;
      }
      if (!seen.insert(screen.utterance_id).second)
        v.push_back("listener " + l.listener_id + " rates utterance " + screen.utterance_id + " more than once");
      ++per_domain[it->second];
      ++ratings[screen.utterance_id];
      const std::set<std::string> order(screen.system_order.begin(), screen.system_order.end());
      if (order != systems || screen.system_order.size() != systems.size())
        v.push_back("listener " + l.listener_id + " screen " + std::to_string(s + 1) +
                    " does not present every system exactly once");
    }
    for (const auto& [d, q] : quota)
      if (per_domain[d] != q)
        v.push_back("listener " + l.listener_id + " has " + std::to_string(per_domain[d]) + " screens from domain " +
                    d + ", quota is " + std::to_string(q));
  }
  for (const auto& u : plan.utterances)
    if (ratings[u.id] != plan.ratings_per_utterance)
      v.push_back("utterance " + u.id + " is rated " + std::to_string(ratings[u.id]) + " times, expected " +
                  std::to_string(plan.ratings_per_utterance));
  return v;
}

std::vector<std::string> validate_ratings(const Assignment& a, const std::vector<RatingKey>& ratings) {
  std::vector<std::string> v;
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::size_t>> screens;
  for (const auto& l : a.listeners)
    for (const auto& s : l.screens) screens[{l.listener_id, s.utterance_id}];
  for (const auto& r : ratings) {
    auto it = screens.find({r.listener_id, r.utterance_id});
    if (it == screens.end()) {
      v.push_back("rating by " + r.listener_id + " for " + r.utterance_id + " is not in the assignment");
      continue;
    }
    ++it->second[r.system];
  }
  std::map<std::string, std::size_t> complete;
  for (const auto& [key, counts] : screens) {
    bool ok = true;
    for (const auto& sys : a.plan.systems) {
      auto c = counts.find(sys);
      const std::size_t n = c == counts.end() ? 0 : c->second;
      if (n > 1)
        v.push_back("listener " + key.first + " rated " + sys + " on " + key.second + " " + std::to_string(n) +
                    " times");
      ok &= n == 1;
    }
    for (const auto& [sys, n] : counts)
      if (std::find(a.plan.systems.begin(), a.plan.systems.end(), sys) == a.plan.systems.end())
        v.push_back("rating for unknown system " + sys);
    if (ok) ++complete[key.second];
  }
  for (const auto& u : a.plan.utterances)
    if (complete[u.id] != a.plan.ratings_per_utterance)
      v.push_back("utterance " + u.id + " has " + std::to_string(complete[u.id]) + " complete screens, expected " +
                  std::to_string(a.plan.ratings_per_utterance));
  return v;
}

json to_json(const Assignment& a) {
  json j;
  j["format"] = "ssws-assignment";
  j["version"] = 1;
  j["seed"] = a.plan.seed;
  j["listener_count"] = a.plan.listeners;
  j["screens_per_listener"] = a.plan.screens_per_listener;
  j["ratings_per_utterance"] = a.plan.ratings_per_utterance;
  j["systems"] = a.plan.systems;
  j["utterances"] = json::array();
  for (const auto& u : a.plan.utterances) j["utterances"].push_back({{"id", u.id}, {"domain", u.domain}, {"audio", u.audio}});
  j["listeners"] = json::array();
  for (const auto& l : a.listeners) {
    json screens = json::array();
    for (const auto& s : l.screens) screens.push_back({{"utterance", s.utterance_id}, {"systems", s.system_order}});
    j["listeners"].push_back({{"id", l.listener_id}, {"screens", std::move(screens)}});
  }
  return j;
}

Assignment assignment_from_json(const json& j) {
  try {
    if (j.at("format") != "ssws-assignment") throw DesignError("not an assignment file");
    if (j.at("version") != 1) throw DesignError("unsupported assignment version");
    Assignment a;
    a.plan.seed = j.at("seed").get<std::uint64_t>();
    a.plan.listeners = j.at("listener_count").get<std::size_t>();
    a.plan.screens_per_listener = j.at("screens_per_listener").get<std::size_t>();
    a.plan.ratings_per_utterance = j.at("ratings_per_utterance").get<std::size_t>();
    a.plan.systems = j.at("systems").get<std::vector<std::string>>();
    for (const auto& u : j.at("utterances"))
      a.plan.utterances.push_back({u.at("id").get<std::string>(), u.at("domain").get<std::string>(),
                                   u.at("audio").get<std::map<std::string, std::string>>()});
    for (const auto& l : j.at("listeners")) {
      ListenerAssignment la;
      la.listener_id = l.at("id").get<std::string>();
      for (const auto& s : l.at("screens"))
        la.screens.push_back({s.at("utterance").get<std::string>(), s.at("systems").get<std::vector<std::string>>()});
      a.listeners.push_back(std::move(la));
    }
    return a;
  } catch (const json::exception& e) {
    throw DesignError(std::string("malformed assignment: ") + e.what());
  }
}

void write_assignment(const std::string& path, const Assignment& a) {
  std::ofstream out(path);
  if (!out) throw DesignError("cannot write " + path);
  out << to_json(a).dump(1) << '\n';
}

Assignment read_assignment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DesignError("cannot open assignment " + path);
  try {
    return assignment_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw DesignError("malformed assignment " + path + ": " + e.what());
  }
}

}  // namespace ssws::mushra
