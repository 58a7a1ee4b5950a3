#include "ssws/mushra/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "ssws/util/csv.hpp"

namespace ssws::mushra {

namespace {

int parse_score(const std::string& field, std::size_t row) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != field.size())
    throw std::runtime_error("ratings row " + std::to_string(row) + ": score '" + field + "' is not an integer");
  if (v < 0 || v > 100)
    throw std::runtime_error("ratings row " + std::to_string(row) + ": score " + field + " outside 0..100");
  return v;
}

std::vector<Rating> ratings_from_rows(const std::vector<util::CsvRow>& rows) {
  if (rows.empty()) throw std::runtime_error("ratings table has no header");
  const auto& h = rows.front();
  const auto lc = util::column_index(h, "listener_id"), uc = util::column_index(h, "utterance_id"),
             dc = util::column_index(h, "domain"), sc = util::column_index(h, "system"),
             vc = util::column_index(h, "score");
  std::size_t tc = h.size();
  for (std::size_t c = 0; c < h.size(); ++c)
    if (h[c] == "timestamp") tc = c;
  std::vector<Rating> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() == 1 && r[0].empty()) continue;
    if (r.size() != h.size())
      throw std::runtime_error("ratings row " + std::to_string(i + 1) + " has " + std::to_string(r.size()) +
                               " fields, expected " + std::to_string(h.size()));
    out.push_back({r[lc], r[uc], r[dc], r[sc], parse_score(r[vc], i + 1), tc < r.size() ? r[tc] : ""});
  }
  return out;
}

std::string csv_row(const util::CsvRow& fields) { return util::csv_line(fields) + '\n'; }

std::string fixed(double v, int digits = 2) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << v;
  return o.str();
}

std::string full(double v) {
  std::ostringstream o;
  o << std::setprecision(10) << v;
  return o.str();
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string lpad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Nonzero differences and the average ranks of their magnitudes.
void signed_ranks(const std::vector<double>& a, const std::vector<double>& b, std::vector<double>& diff,
                  std::vector<double>& ranks) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon: samples differ in length");
  diff.clear();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) diff.push_back(a[i] - b[i]);
  if (diff.empty()) throw std::domain_error("wilcoxon: every paired difference is zero");
  std::vector<double> mag;
  for (double d : diff) mag.push_back(std::abs(d));
  // Magnitudes rank ascending; negate so screen_ranks' descending order applies.
  std::vector<double> neg;
  for (double m : mag) neg.push_back(-m);
  if (neg.size() == 1) {
    ranks = {1.0};
    return;
  }
  ranks = screen_ranks(neg);
}

}  // namespace

std::vector<Rating> parse_ratings_csv(const std::string& text) {
  std::istringstream in(text);
  return ratings_from_rows(util::read_csv(in));
}

std::vector<Rating> read_ratings_csv(const std::string& path) { return ratings_from_rows(util::read_csv_file(path)); }

std::string ratings_csv(const std::vector<Rating>& ratings) {
  std::string out = "listener_id,utterance_id,domain,system,score,timestamp\n";
  for (const auto& r : ratings)
    out += csv_row({r.listener_id, r.utterance_id, r.domain, r.system, std::to_string(r.score), r.timestamp});
  return out;
}

std::vector<double> screen_ranks(const std::vector<double>& scores) {
  if (scores.size() < 2) throw std::invalid_argument("screen_ranks: a screen needs at least two systems");
  const std::size_t k = scores.size();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return scores[x] > scores[y]; });
  std::vector<double> ranks(k);
  for (std::size_t i = 0; i < k;) {
    std::size_t j = i;
    while (j + 1 < k && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = avg;
    i = j + 1;
  }
  return ranks;
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired t-test: samples differ in length");
  if (a.size() < 2) throw std::invalid_argument("paired t-test: at least two pairs are needed");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double m = mean(d);
  double ss = 0.0;
  for (double x : d) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  TTestResult r;
  r.dof = n - 1;
  if (sd == 0.0) {
    if (m == 0.0) return r;
    r.degenerate = true;
    r.t = m > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = m / (sd / std::sqrt(static_cast<double>(n)));
  boost::math::students_t dist(static_cast<double>(r.dof));
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

WilcoxonResult wilcoxon_normal_approximation(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> diff, ranks;
  signed_ranks(a, b, diff, ranks);
  WilcoxonResult r;
  r.n = diff.size();
  for (std::size_t i = 0; i < r.n; ++i) (diff[i] > 0 ? r.w_plus : r.w_minus) += ranks[i];
  const double n = static_cast<double>(r.n);
  const double mu = n * (n + 1) / 4.0;
  double ties = 0.0;
  std::vector<double> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    ties += t * t * t - t;
    i = j;
  }
  const double var = n * (n + 1) * (2 * n + 1) / 24.0 - ties / 48.0;
  const double z = std::max(0.0, std::abs(r.w_plus - mu) - 0.5) / std::sqrt(var);
  r.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  r.exact = false;
  return r;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> diff, ranks;
  signed_ranks(a, b, diff, ranks);
  if (diff.size() > kWilcoxonExactLimit) return wilcoxon_normal_approximation(a, b);

  WilcoxonResult r;
  r.n = diff.size();
  r.exact = true;
  // Ranks are multiples of 1/2, so doubled ranks are integers.
  std::vector<std::size_t> doubled;
  std::size_t total = 0, observed = 0;
  for (std::size_t i = 0; i < r.n; ++i) {
    doubled.push_back(static_cast<std::size_t>(std::lround(2.0 * ranks[i])));
    total += doubled.back();
    if (diff[i] > 0) {
      r.w_plus += ranks[i];
      observed += doubled.back();
    } else {
      r.w_minus += ranks[i];
    }
  }
  std::vector<std::uint64_t> count(total + 1, 0);
  count[0] = 1;
  std::size_t reach = 0;
  for (std::size_t v : doubled) {
    reach += v;
    for (std::size_t s = reach; s >= v; --s) count[s] += count[s - v];
  }
  std::uint64_t low = 0, high = 0;
  for (std::size_t s = 0; s <= total; ++s) {
    if (s <= observed) low += count[s];
    if (s >= observed) high += count[s];
  }
  const double patterns = std::ldexp(1.0, static_cast<int>(r.n));
  r.p = std::min(1.0, 2.0 * std::min(low, high) / patterns);
  return r;
}

HolmResult holm_bonferroni(const std::vector<double>& pvalues, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("holm: alpha must lie in (0, 1)");
  for (double p : pvalues)
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("holm: p-value outside [0, 1]");
  const std::size_t m = pvalues.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return pvalues[x] < pvalues[y]; });
  HolmResult r{std::vector<double>(m), std::vector<bool>(m, false)};
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    running = std::max(running, std::min(1.0, static_cast<double>(m - k) * pvalues[order[k]]));
    r.adjusted[order[k]] = running;
    r.reject[order[k]] = running <= alpha;
  }
  return r;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

namespace {

struct ScreenData {
  std::string domain;
  std::vector<double> scores;  // per system; NaN when missing
};

GroupSummary summarize_group(const std::string& group, const std::vector<const ScreenData*>& screens,
                             std::size_t incomplete, const std::vector<std::string>& systems, double alpha) {
  const std::size_t k = systems.size();
  GroupSummary g;
  g.group = group;
  g.screens = screens.size();
  g.incomplete_screens = incomplete;
  std::vector<std::vector<double>> scores(k), ranks(k);
  for (const auto* s : screens) {
    auto r = screen_ranks(s->scores);
    for (std::size_t i = 0; i < k; ++i) {
      scores[i].push_back(s->scores[i]);
      ranks[i].push_back(r[i]);
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    SystemSummary s{systems[i]};
    if (!screens.empty()) {
      s.mean_score = mean(scores[i]);
      s.median_score = median(scores[i]);
      s.mean_rank = mean(ranks[i]);
      s.median_rank = median(ranks[i]);
    }
    g.systems.push_back(s);
  }

  std::vector<PairTest> ttests, wtests;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      PairTest t{group, systems[i], systems[j], "t-test", 0.0, 1.0, 1.0, false, ""};
      if (screens.size() >= 2) {
        auto r = paired_t_test(scores[i], scores[j]);
        t.statistic = r.t;
        t.p = r.p;
        if (r.degenerate) t.note = "zero variance";
      } else {
        t.note = "fewer than two screens";
      }
      ttests.push_back(t);

      PairTest w{group, systems[i], systems[j], "wilcoxon", 0.0, 1.0, 1.0, false, ""};
      try {
        auto r = wilcoxon_signed_rank(ranks[i], ranks[j]);
        w.statistic = r.w_plus;
        w.p = r.p;
        if (!r.exact) w.note = "normal approximation";
      } catch (const std::domain_error&) {
        w.note = "all differences zero";
      }
      wtests.push_back(w);
    }
  for (auto* family : {&ttests, &wtests}) {
    std::vector<double> p;
    for (const auto& t : *family) p.push_back(t.p);
    if (p.empty()) continue;
    auto h = holm_bonferroni(p, alpha);
    for (std::size_t i = 0; i < family->size(); ++i) {
      (*family)[i].p_adjusted = h.adjusted[i];
      (*family)[i].significant = h.reject[i];
    }
  }
  g.pairs = ttests;
  g.pairs.insert(g.pairs.end(), wtests.begin(), wtests.end());
  return g;
}

}  // namespace

AnalysisReport summarize(const std::vector<Rating>& ratings, double alpha, std::vector<std::string> systems) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (systems.empty())
    for (const auto& r : ratings)
      if (std::find(systems.begin(), systems.end(), r.system) == systems.end()) systems.push_back(r.system);
  if (systems.size() < 2) throw std::invalid_argument("analysis needs at least two systems");

  std::map<std::pair<std::string, std::string>, ScreenData> screens;
  std::vector<std::pair<std::string, std::string>> screen_order;
  std::vector<std::string> domains;
  for (const auto& r : ratings) {
    auto sys = std::find(systems.begin(), systems.end(), r.system);
    if (sys == systems.end()) throw std::invalid_argument("rating for unknown system " + r.system);
    const auto key = std::make_pair(r.listener_id, r.utterance_id);
    auto [it, inserted] = screens.try_emplace(key);
    if (inserted) {
      it->second.domain = r.domain;
      it->second.scores.assign(systems.size(), std::numeric_limits<double>::quiet_NaN());
      screen_order.push_back(key);
      if (std::find(domains.begin(), domains.end(), r.domain) == domains.end()) domains.push_back(r.domain);
    } else if (it->second.domain != r.domain) {
      throw std::invalid_argument("utterance " + r.utterance_id + " appears under two domains");
    }
    double& slot = it->second.scores[static_cast<std::size_t>(sys - systems.begin())];
    if (!std::isnan(slot))
      throw std::invalid_argument("listener " + r.listener_id + " rated " + r.system + " on " + r.utterance_id +
                                  " twice");
    slot = r.score;
  }

  auto collect = [&](const std::string* domain, std::size_t& incomplete) {
    std::vector<const ScreenData*> out;
    incomplete = 0;
    for (const auto& key : screen_order) {
      const auto& s = screens.at(key);
      if (domain && s.domain != *domain) continue;
      if (std::any_of(s.scores.begin(), s.scores.end(), [](double v) { return std::isnan(v); }))
        ++incomplete;
      else
        out.push_back(&s);
    }
    return out;
  };

  AnalysisReport rep;
  rep.alpha = alpha;
  rep.systems = systems;
  std::size_t incomplete = 0;
  auto all = collect(nullptr, incomplete);
  rep.overall = summarize_group("all", all, incomplete, systems, alpha);
  for (const auto& d : domains) {
    auto in_domain = collect(&d, incomplete);
    rep.domains.push_back(summarize_group(d, in_domain, incomplete, systems, alpha));
  }
  return rep;
}

std::string format_report(const AnalysisReport& rep) {
  std::ostringstream o;
  std::size_t sw = 6;
  for (const auto& s : rep.systems) sw = std::max(sw, s.size());
  std::size_t dw = 6;
  for (const auto& g : rep.domains) dw = std::max(dw, g.group.size());

  auto row = [&](const SystemSummary& s) {
    return lpad(fixed(s.mean_score), 11) + lpad(fixed(s.median_score, 1), 13) + lpad(fixed(s.mean_rank), 10) +
           lpad(fixed(s.median_rank, 1), 12);
  };
  const std::string cols = lpad("Mean score", 11) + lpad("Median score", 13) + lpad("Mean rank", 10) +
                           lpad("Median rank", 12);

  o << "Listener ratings, all domains (" << rep.overall.screens << " screens";
  if (rep.overall.incomplete_screens) o << ", " << rep.overall.incomplete_screens << " incomplete excluded";
  o << ")\n";
  o << pad("System", sw) << cols << '\n';
  for (const auto& s : rep.overall.systems) o << pad(s.system, sw) << row(s) << '\n';

  o << "\nListener ratings by domain\n";
  o << pad("Domain", dw) << "  " << pad("System", sw) << cols << "  Screens\n";
  for (const auto& g : rep.domains)
    for (const auto& s : g.systems) o << pad(g.group, dw) << "  " << pad(s.system, sw) << row(s) << lpad(std::to_string(g.screens), 9) << '\n';

  o << "\nPairwise tests (Holm-Bonferroni per group and test, alpha = " << rep.alpha << ")\n";
  o << pad("Group", dw) << "  " << pad("Test", 9) << pad("Pair", 2 * sw + 4) << lpad("Statistic", 11)
    << lpad("p", 12) << lpad("p (Holm)", 12) << "  Significant\n";
  auto pairs = [&](const GroupSummary& g) {
    for (const auto& p : g.pairs)
      o << pad(g.group, dw) << "  " << pad(p.test, 9) << pad(p.system_a + " vs " + p.system_b, 2 * sw + 4)
        << lpad(fixed(p.statistic, 3), 11) << lpad(full(p.p), 12) << lpad(full(p.p_adjusted), 12) << "  "
        << (p.significant ? "yes" : "no") << (p.note.empty() ? "" : " (" + p.note + ")") << '\n';
  };
  pairs(rep.overall);
  for (const auto& g : rep.domains) pairs(g);
  return o.str();
}

std::string pairwise_csv(const AnalysisReport& rep) {
  std::string out = "group,system_a,system_b,test,statistic,p,p_adjusted,significant,note\n";
  auto add = [&](const GroupSummary& g) {
    for (const auto& p : g.pairs)
      out += csv_row({p.group, p.system_a, p.system_b, p.test, full(p.statistic), full(p.p),
                             full(p.p_adjusted), p.significant ? "true" : "false", p.note});
  };
  add(rep.overall);
  for (const auto& g : rep.domains) add(g);
  return out;
}

std::string summary_csv(const AnalysisReport& rep) {
  std::string out = "group,system,mean_score,median_score,mean_rank,median_rank\n";
  auto add = [&](const GroupSummary& g) {
    for (const auto& s : g.systems)
      out += csv_row({g.group, s.system, full(s.mean_score), full(s.median_score), full(s.mean_rank),
                             full(s.median_rank)});
  };
  add(rep.overall);
  for (const auto& g : rep.domains) add(g);
  return out;
}

}  // namespace ssws::mushra
