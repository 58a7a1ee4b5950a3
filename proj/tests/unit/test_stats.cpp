#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "doctest.h"
#include "ssws/mushra/stats.hpp"
#include "stats_oracle.hpp"

using namespace ssws::mushra;
using namespace ssws::testing;

namespace {

std::vector<Rating> fixture_ratings() {
  // 2 listeners x 2 utterances x 3 systems.
  std::vector<Rating> r;
  auto add = [&](const char* l, const char* u, const char* d, const char* s, int score) {
    r.push_back({l, u, d, s, score, ""});
  };
  add("L1", "u1", "news", "A", 80);
  add("L1", "u1", "news", "B", 60);
  add("L1", "u1", "news", "C", 60);
  add("L1", "u2", "books", "A", 70);
  add("L1", "u2", "books", "B", 90);
  add("L1", "u2", "books", "C", 10);
  add("L2", "u1", "news", "A", 50);
  add("L2", "u1", "news", "B", 40);
  add("L2", "u1", "news", "C", 30);
  add("L2", "u2", "books", "A", 100);
  add("L2", "u2", "books", "B", 20);
  add("L2", "u2", "books", "C", 0);
  return r;
}

}  // namespace

TEST_CASE("screen ranks") {
  CHECK(screen_ranks({80, 60, 40, 20}) == std::vector<double>{1, 2, 3, 4});
  CHECK(screen_ranks({50, 50, 30, 20}) == std::vector<double>{1.5, 1.5, 3, 4});
  CHECK(screen_ranks({7, 7, 7, 7}) == std::vector<double>{2.5, 2.5, 2.5, 2.5});
  CHECK(screen_ranks({20, 80, 20, 50}) == std::vector<double>{3.5, 1, 3.5, 2});
  CHECK_THROWS(screen_ranks({5}));
}

TEST_CASE("rank sums and invariance under increasing transforms") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> score(0, 100);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> s(4);
    for (auto& v : s) v = score(rng) / 10 * 10;  // coarse, so ties are common
    auto r = screen_ranks(s);
    double total = 0;
    for (double v : r) total += v;
    REQUIRE(total == 10.0);
    std::vector<double> t;
    for (double v : s) t.push_back(std::exp(v / 20.0) + 3.0);
    REQUIRE(screen_ranks(t) == r);
  }
}

TEST_CASE("paired t-test worked example") {
  std::vector<double> a{2, -1, 3, 0, 1}, b(5, 0.0);
  auto r = paired_t_test(a, b);
  CHECK(r.t == doctest::Approx(1.4142).epsilon(1e-4));
  CHECK(r.dof == 4);
  CHECK(std::abs(r.p - 0.2302) < 1e-3);
  CHECK(r.p == doctest::Approx(t_two_sided_p(r.t, 4)).epsilon(1e-6));
}

TEST_CASE("paired t-test against the numerical t tail") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.3, 1.0);
  for (std::size_t size : {3u, 8u, 30u}) {
    std::vector<double> a(size), b(size);
    for (std::size_t i = 0; i < size; ++i) {
      a[i] = n(rng);
      b[i] = n(rng) - 0.2;
    }
    auto r = paired_t_test(a, b);
    CHECK(r.p == doctest::Approx(t_two_sided_p(r.t, static_cast<double>(size - 1))).epsilon(1e-6));
    auto s = paired_t_test(b, a);
    CHECK(s.t == -r.t);
    CHECK(s.p == r.p);
  }
}

TEST_CASE("paired t-test edge cases") {
  std::vector<double> a{1, 2, 3};
  auto same = paired_t_test(a, a);
  CHECK(same.t == 0.0);
  CHECK(same.p == 1.0);
  CHECK_FALSE(same.degenerate);
  auto flat = paired_t_test({2, 3, 4, 5}, {1, 2, 3, 4});
  CHECK(flat.degenerate);
  CHECK(flat.p == 0.0);
  CHECK(std::isinf(flat.t));
  CHECK_THROWS_AS(paired_t_test({1}, {2}), std::invalid_argument);
  CHECK_THROWS_AS(paired_t_test({1, 2}, {2}), std::invalid_argument);
}

TEST_CASE("wilcoxon small example") {
  auto r = wilcoxon_signed_rank({1, 2, 3}, {0, 0, 0});
  CHECK(r.w_plus == 6.0);
  CHECK(r.w_minus == 0.0);
  CHECK(r.exact);
  CHECK(r.p == 0.25);
  CHECK_THROWS_AS(wilcoxon_signed_rank({1, 2}, {1, 2}), std::domain_error);
}

TEST_CASE("wilcoxon exact p equals brute-force enumeration") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> score(0, 10);
  int checked = 0;
  for (std::size_t n = 1; n <= 12; ++n)
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = score(rng);
        b[i] = score(rng) + (trial % 3 == 0 ? 2 : 0);
      }
      bool all_zero = true;
      for (std::size_t i = 0; i < n; ++i) all_zero &= a[i] == b[i];
      if (all_zero) continue;
      REQUIRE(wilcoxon_signed_rank(a, b).p == brute_force_wilcoxon_p(a, b));
      ++checked;
    }
  CHECK(checked > 1100);
}

TEST_CASE("wilcoxon exact and normal approximation agree at the crossover") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(20), b(20);
    for (std::size_t i = 0; i < 20; ++i) {
      a[i] = n(rng) + 0.3;
      b[i] = n(rng);
    }
    auto exact = wilcoxon_signed_rank(a, b);
    auto approx = wilcoxon_normal_approximation(a, b);
    REQUIRE(exact.exact);
    REQUIRE_FALSE(approx.exact);
    CHECK(std::abs(exact.p - approx.p) < 0.01);
  }
  std::vector<double> a(21), b(21, 0.0);
  for (std::size_t i = 0; i < 21; ++i) a[i] = static_cast<double>(i) - 4.5;
  CHECK_FALSE(wilcoxon_signed_rank(a, b).exact);
}

TEST_CASE("holm on hand-worked vectors") {
  auto r = holm_bonferroni({0.01, 0.04}, 0.05);
  CHECK(r.adjusted[0] == doctest::Approx(0.02));
  CHECK(r.adjusted[1] == doctest::Approx(0.04));
  CHECK(r.reject == std::vector<bool>{true, true});
  CHECK(holm_bonferroni({0.3}, 0.05).adjusted[0] == 0.3);

  const std::vector<std::vector<double>> fixed{
      {0.01, 0.02, 0.03, 0.04, 0.05, 0.06},
      {0.001, 0.2, 0.0001, 0.9, 0.04, 0.011},
      {0.5, 0.5, 0.5},
      {0.0, 1.0},
      {0.04, 0.01, 0.03},
      {0.2, 0.001, 0.0049, 0.0015, 0.3, 0.6},
      {1e-6, 2e-6, 3e-6, 4e-6},
      {0.008, 0.009, 0.0095},
      {0.3, 0.02, 0.02, 0.02},
      {0.6, 0.4, 0.3, 0.2, 0.1, 0.05, 0.01},
  };
  for (const auto& p : fixed) {
    auto h = holm_bonferroni(p, 0.01);
    auto expected = hand_holm(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      REQUIRE(h.adjusted[i] == doctest::Approx(expected[i]).epsilon(1e-15));
      REQUIRE(h.reject[i] == (expected[i] <= 0.01));
      // Holm rejects everything Bonferroni rejects.
      if (p[i] * static_cast<double>(p.size()) <= 0.01) REQUIRE(h.reject[i]);
    }
  }
  CHECK_THROWS(holm_bonferroni({0.5, 1.5}, 0.05));
  CHECK_THROWS(holm_bonferroni({0.5}, 0.0));
}

TEST_CASE("median convention") {
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK_THROWS(median({}));
}

TEST_CASE("summary of a hand-worked fixture") {
  auto rep = summarize(fixture_ratings(), 0.01, {"A", "B", "C"});
  REQUIRE(rep.overall.systems.size() == 3);
  const auto& A = rep.overall.systems[0];
  const auto& B = rep.overall.systems[1];
  const auto& C = rep.overall.systems[2];
  CHECK(rep.overall.screens == 4);
  CHECK(A.mean_score == 75.0);   // 80 70 50 100
  CHECK(A.median_score == 75.0);
  CHECK(B.mean_score == 52.5);   // 60 90 40 20
  CHECK(B.median_score == 50.0);
  CHECK(C.mean_score == 25.0);   // 60 10 30 0
  CHECK(C.median_score == 20.0);
  // ranks A: 1 2 1 1, B: 2.5 1 2 2, C: 2.5 3 3 3
  CHECK(A.mean_rank == 1.25);
  CHECK(A.median_rank == 1.0);
  CHECK(B.mean_rank == 1.875);
  CHECK(B.median_rank == 2.0);
  CHECK(C.mean_rank == 2.875);
  CHECK(C.median_rank == 3.0);
  CHECK(rep.overall.pairs.size() == 6);  // 3 pairs x 2 tests

  REQUIRE(rep.domains.size() == 2);
  CHECK(rep.domains[0].group == "news");
  CHECK(rep.domains[0].screens == 2);
  CHECK(rep.domains[0].systems[0].mean_score == 65.0);
}

TEST_CASE("four systems give six comparisons per family") {
  std::vector<Rating> r;
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> s(0, 100);
  for (int l = 0; l < 5; ++l)
    for (int u = 0; u < 4; ++u)
      for (const char* sys : {"rec", "ssws", "hybrid", "spss"})
        r.push_back({"L" + std::to_string(l), "u" + std::to_string(u), u < 2 ? "a" : "b", sys, s(rng), ""});
  auto rep = summarize(r);
  std::size_t t = 0, w = 0;
  for (const auto& p : rep.overall.pairs) (p.test == "t-test" ? t : w)++;
  CHECK(t == 6);
  CHECK(w == 6);
  CHECK(rep.systems == std::vector<std::string>{"rec", "ssws", "hybrid", "spss"});
}

TEST_CASE("identical scores give no significant pairs") {
  std::vector<Rating> r;
  for (int l = 0; l < 10; ++l)
    for (int u = 0; u < 3; ++u)
      for (const char* sys : {"A", "B", "C", "D"}) r.push_back({"L" + std::to_string(l), "u" + std::to_string(u), "d", sys, 40 + u, ""});
  auto rep = summarize(r);
  for (const auto& p : rep.overall.pairs) CHECK_FALSE(p.significant);
  for (const auto& g : rep.domains)
    for (const auto& p : g.pairs) CHECK_FALSE(p.significant);
}

TEST_CASE("incomplete screens are excluded and counted") {
  auto r = fixture_ratings();
  r.pop_back();
  auto rep = summarize(r, 0.01, {"A", "B", "C"});
  CHECK(rep.overall.screens == 3);
  CHECK(rep.overall.incomplete_screens == 1);
}

TEST_CASE("score means ignore row order") {
  auto r = fixture_ratings();
  auto base = summarize(r, 0.01, {"A", "B", "C"});
  std::mt19937_64 rng(6);
  std::shuffle(r.begin(), r.end(), rng);
  auto shuffled = summarize(r, 0.01, {"A", "B", "C"});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(shuffled.overall.systems[i].mean_score == base.overall.systems[i].mean_score);
    CHECK(shuffled.overall.systems[i].mean_rank == base.overall.systems[i].mean_rank);
  }
}

TEST_CASE("ratings csv round trip and report schemas") {
  auto r = fixture_ratings();
  r[0].timestamp = "2026-01-01T00:00:00Z";
  auto back = parse_ratings_csv(ratings_csv(r));
  REQUIRE(back.size() == r.size());
  CHECK(back[0].timestamp == r[0].timestamp);
  CHECK(back[5].score == 10);
  CHECK_THROWS(parse_ratings_csv("listener_id,utterance_id,domain,system,score,timestamp\nL,u,d,A,101,\n"));
  CHECK_THROWS(parse_ratings_csv("listener_id,utterance_id,domain,system,score,timestamp\nL,u,d,A,x,\n"));
  CHECK(parse_ratings_csv("listener_id,utterance_id,domain,system,score,timestamp\n").empty());

  auto rep = summarize(r, 0.01, {"A", "B", "C"});
  auto text = format_report(rep);
  CHECK(text.find("Mean score") != std::string::npos);
  CHECK(text.find("Median rank") != std::string::npos);
  CHECK(text.find("books") != std::string::npos);
  CHECK(summary_csv(rep).rfind("group,system,mean_score,median_score,mean_rank,median_rank\n", 0) == 0);
  CHECK(pairwise_csv(rep).rfind("group,system_a,system_b,test,statistic,p,p_adjusted,significant,note\n", 0) == 0);
}
