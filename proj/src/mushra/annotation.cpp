#include "ssws/mushra/annotation.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <sstream>

#include "ssws/util/csv.hpp"

namespace ssws::mushra {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string rpad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::vector<ErrorFlag> flags_from_rows(const std::vector<util::CsvRow>& rows) {
  if (rows.empty()) throw FlagError("flags table has no header");
  const auto& h = rows.front();
  const auto ac = util::column_index(h, "annotator_id"), uc = util::column_index(h, "utterance_id"),
             sc = util::column_index(h, "system"), cc = util::column_index(h, "category"),
             vc = util::column_index(h, "severity");
  std::size_t nc = h.size();
  for (std::size_t c = 0; c < h.size(); ++c)
    if (h[c] == "note") nc = c;
  std::vector<ErrorFlag> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() == 1 && r[0].empty()) continue;
    if (r.size() != h.size())
      throw FlagError("flags row " + std::to_string(i + 1) + " has " + std::to_string(r.size()) + " fields");
    out.push_back({r[ac], r[uc], r[sc], parse_category(r[cc]), parse_severity(r[vc]), nc < r.size() ? r[nc] : ""});
  }
  return out;
}

}  // namespace

std::string to_string(Category c) {
  switch (c) {
    case Category::AudioGlitch: return "audio glitch";
    case Category::Stress: return "stress";
    case Category::IntonationProsody: return "intonation/prosody";
    case Category::Pronunciation: return "pronunciation";
    case Category::PauseInsertion: return "incorrect pause insertion";
    case Category::PitchAccent: return "incorrect pitch accent";
    case Category::TextNormalisation: return "text normalisation";
    case Category::Other: return "other";
  }
  return "other";
}

std::string to_string(Severity s) {
  switch (s) {
    case Severity::Critical: return "critical";
    case Severity::Medium: return "medium";
    case Severity::Minor: return "minor";
  }
  return "minor";
}

Category parse_category(const std::string& name) {
  const auto n = lower(name);
  for (auto c : kCategories)
    if (n == to_string(c)) return c;
  if (n == "incorrect pitch insertion") return Category::PitchAccent;
  throw FlagError("unknown error category '" + name + "'");
}

Severity parse_severity(const std::string& name) {
  const auto n = lower(name);
  for (auto s : kSeverities)
    if (n == to_string(s)) return s;
  throw FlagError("unknown severity '" + name + "'");
}

std::string flags_csv(const std::vector<ErrorFlag>& flags) {
  std::string out = util::csv_line({"annotator_id", "utterance_id", "system", "category", "severity", "note"}) + '\n';
  for (const auto& f : flags)
    out += util::csv_line({f.annotator_id, f.utterance_id, f.system, to_string(f.category), to_string(f.severity),
                           f.note}) +
           '\n';
  return out;
}

std::vector<ErrorFlag> parse_flags_csv(const std::string& text) {
  std::istringstream in(text);
  return flags_from_rows(util::read_csv(in));
}

std::vector<ErrorFlag> read_flags_csv(const std::string& path) { return flags_from_rows(util::read_csv_file(path)); }

std::map<std::string, CategoryTable> aggregate_by_system(const std::vector<ErrorFlag>& flags,
                                                         const std::vector<std::string>& systems) {
  std::map<std::string, CategoryTable> out;
  auto ensure = [&](const std::string& sys) -> CategoryTable& {
    auto& t = out[sys];
    for (auto c : kCategories) t.try_emplace(c, SeverityCounts{0, 0, 0});
    return t;
  };
  for (const auto& s : systems) ensure(s);
  for (const auto& f : flags) ++ensure(f.system)[f.category][static_cast<std::size_t>(f.severity)];
  return out;
}

std::map<std::string, SeverityCounts> aggregate_by_domain(const std::vector<ErrorFlag>& flags,
                                                          const std::map<std::string, std::string>& domain_of,
                                                          const DomainFilter& filter) {
  std::map<std::string, SeverityCounts> out;
  for (const auto& [u, d] : domain_of) out.try_emplace(d, SeverityCounts{0, 0, 0});
  for (const auto& f : flags) {
    auto it = domain_of.find(f.utterance_id);
    if (it == domain_of.end()) throw FlagError("utterance '" + f.utterance_id + "' has no domain");
    if (!filter.system.empty() && f.system != filter.system) continue;
    if (!filter.any_category && f.category != filter.category) continue;
    ++out[it->second][static_cast<std::size_t>(f.severity)];
  }
  return out;
}

std::string format_system_table(const std::map<std::string, CategoryTable>& table,
                                const std::vector<std::string>& system_order) {
  std::vector<std::string> order = system_order;
  for (const auto& [s, t] : table)
    if (std::find(order.begin(), order.end(), s) == order.end()) order.push_back(s);

  std::ostringstream o;
  for (const auto& sys : order) {
    auto it = table.find(sys);
    if (it == table.end()) continue;
    o << "System: " << sys << "\n";
    o << pad("Category", 28) << rpad("Critical", 10) << rpad("Medium", 10) << rpad("Minor", 10) << rpad("Total", 10)
      << "\n";
    SeverityCounts sum{0, 0, 0};
    for (auto c : kCategories) {
      auto name = to_string(c);
      name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
      const auto& n = it->second.at(c);
      o << pad(name, 28);
      for (std::size_t s = 0; s < 3; ++s) {
        o << rpad(std::to_string(n[s]), 10);
        sum[s] += n[s];
      }
      o << rpad(std::to_string(n[0] + n[1] + n[2]), 10) << "\n";
    }
    o << pad("All", 28);
    for (auto v : sum) o << rpad(std::to_string(v), 10);
    o << rpad(std::to_string(sum[0] + sum[1] + sum[2]), 10) << "\n\n";
  }
  return o.str();
}

std::string format_domain_table(const std::map<std::string, SeverityCounts>& table, const std::string& title) {
  std::ostringstream o;
  o << title << "\n";
  o << pad("Domain", 20) << rpad("Critical", 10) << rpad("Medium", 10) << rpad("Minor", 10) << rpad("Total", 10)
    << "\n";
  for (const auto& [d, n] : table) {
    o << pad(d, 20);
    for (auto v : n) o << rpad(std::to_string(v), 10);
    o << rpad(std::to_string(n[0] + n[1] + n[2]), 10) << "\n";
  }
  return o.str();
}

}  // namespace ssws::mushra
