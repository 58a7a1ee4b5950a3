#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssws::mushra {

struct Rating {
  std::string listener_id;
  std::string utterance_id;
  std::string domain;
  std::string system;
  int score = 0;  // 0..100
  std::string timestamp;
};

// Columns: listener_id, utterance_id, domain, system, score, timestamp.
std::vector<Rating> read_ratings_csv(const std::string& path);
std::vector<Rating> parse_ratings_csv(const std::string& text);
std::string ratings_csv(const std::vector<Rating>& ratings);

// Descending-score ranks, 1 = best; ties share the average rank.
std::vector<double> screen_ranks(const std::vector<double>& scores);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t dof = 0;
  bool degenerate = false;  // zero variance with nonzero mean: t infinite, p = 0
};

// Paired two-sided t-test on d = a - b. Throws std::invalid_argument for
// unequal lengths or n < 2.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct WilcoxonResult {
  double w_plus = 0.0;
  double w_minus = 0.0;
  std::size_t n = 0;  // nonzero differences
  double p = 1.0;
  bool exact = false;
};

inline constexpr std::size_t kWilcoxonExactLimit = 20;

// Zero differences are dropped and the rest ranked by magnitude (average
// ties). For n <= kWilcoxonExactLimit the two-sided p is exact over all 2^n
// sign patterns; above it a normal approximation with tie and continuity
// corrections is used. Throws std::domain_error if every difference is zero.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);
WilcoxonResult wilcoxon_normal_approximation(const std::vector<double>& a, const std::vector<double>& b);

struct HolmResult {
  std::vector<double> adjusted;  // in input order
  std::vector<bool> reject;
};

HolmResult holm_bonferroni(const std::vector<double>& pvalues, double alpha);

struct SystemSummary {
  std::string system;
  double mean_score = 0.0;
  double median_score = 0.0;
  double mean_rank = 0.0;
  double median_rank = 0.0;
};

struct PairTest {
  std::string group;  // "all" or a domain
  std::string system_a;
  std::string system_b;
  std::string test;   // "t-test" (scores) or "wilcoxon" (ranks)
  double statistic = 0.0;
  double p = 1.0;
  double p_adjusted = 1.0;
  bool significant = false;
  std::string note;
};

struct GroupSummary {
  std::string group;
  std::size_t screens = 0;
  std::size_t incomplete_screens = 0;
  std::vector<SystemSummary> systems;
  std::vector<PairTest> pairs;
};

struct AnalysisReport {
  double alpha = 0.01;
  std::vector<std::string> systems;
  GroupSummary overall;
  std::vector<GroupSummary> domains;
};

double median(std::vector<double> values);

// Screens are (listener, utterance) pairs. Screens missing a system are
// excluded and counted. Each group gets its own Holm family per test type.
// `systems` fixes the system order; empty means order of first appearance.
AnalysisReport summarize(const std::vector<Rating>& ratings, double alpha = 0.01,
                         std::vector<std::string> systems = {});

// Plain-text tables: the combined table, the per-domain table and the
// pairwise tests.
std::string format_report(const AnalysisReport& report);
// One row per pairwise test: group, system_a, system_b, test, statistic,
// p, p_adjusted, significant, note.
std::string pairwise_csv(const AnalysisReport& report);
// group, system, mean_score, median_score, mean_rank, median_rank.
std::string summary_csv(const AnalysisReport& report);

}  // namespace ssws::mushra
