#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssws::mushra {

enum class Category {
  AudioGlitch,
  Stress,
  IntonationProsody,
  Pronunciation,
  PauseInsertion,
  PitchAccent,
  TextNormalisation,
  Other,
};

enum class Severity { Critical, Medium, Minor };

inline constexpr std::array<Category, 8> kCategories{
    Category::AudioGlitch,    Category::Stress,      Category::IntonationProsody, Category::Pronunciation,
    Category::PauseInsertion, Category::PitchAccent, Category::TextNormalisation, Category::Other};
inline constexpr std::array<Severity, 3> kSeverities{Severity::Critical, Severity::Medium, Severity::Minor};

class FlagError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string to_string(Category c);
std::string to_string(Severity s);
// Case-insensitive. "incorrect pitch insertion" is accepted as the pitch
// accent category. Throws FlagError on anything else.
Category parse_category(const std::string& name);
Severity parse_severity(const std::string& name);

struct ErrorFlag {
  std::string annotator_id;
  std::string utterance_id;
  std::string system;
  Category category = Category::Other;
  Severity severity = Severity::Minor;
  std::string note;
};

// Columns: annotator_id, utterance_id, system, category, severity, note.
std::string flags_csv(const std::vector<ErrorFlag>& flags);
std::vector<ErrorFlag> parse_flags_csv(const std::string& text);
std::vector<ErrorFlag> read_flags_csv(const std::string& path);

using SeverityCounts = std::array<std::size_t, 3>;  // critical, medium, minor
using CategoryTable = std::map<Category, SeverityCounts>;

// system -> category -> severity counts. Every listed system and every
// category appears, zero or not; systems seen only in flags are appended.
std::map<std::string, CategoryTable> aggregate_by_system(const std::vector<ErrorFlag>& flags,
                                                         const std::vector<std::string>& systems = {});

struct DomainFilter {
  std::string system;     // empty matches every system
  bool any_category = true;
  Category category = Category::AudioGlitch;
};

// domain -> severity counts for flags passing the filter. Every domain in
// `domain_of` appears. Throws FlagError when a flag's utterance has no
// domain.
std::map<std::string, SeverityCounts> aggregate_by_domain(const std::vector<ErrorFlag>& flags,
                                                          const std::map<std::string, std::string>& domain_of,
                                                          const DomainFilter& filter = {});

// Tables in the same plain-text style as the ratings report.
std::string format_system_table(const std::map<std::string, CategoryTable>& table,
                                const std::vector<std::string>& system_order = {});
std::string format_domain_table(const std::map<std::string, SeverityCounts>& table, const std::string& title);

}  // namespace ssws::mushra
