#include <catch2/catch_amalgamated.hpp>

#include <xfit/split.hpp>

#include "support/split_checks.hpp"

using namespace xfit;

TEST_CASE("as_independent_split basic shapes", "[split]") {
  auto p = as_independent_split(4, 2, 17);
  REQUIRE(p.folds.size() == 2);
  CHECK(p.folds[0].eval.size() == 2);
  CHECK(p.folds[1].eval.size() == 2);
  CHECK(p.folds[0].train.size() == 2);
  CHECK(xfit_checks::check_partition(p).empty());

  auto p6 = as_independent_split(6, 3, 1);
  for (const auto& f : p6.folds) {
    CHECK(f.eval.size() == 2);
    CHECK(f.train.size() == 4);
  }

  auto p5 = as_independent_split(5, 2, 99);
  std::multiset<std::size_t> sizes{p5.folds[0].eval.size(), p5.folds[1].eval.size()};
  CHECK(sizes == std::multiset<std::size_t>{2, 3});

  CHECK_THROWS_AS(as_independent_split(10, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(as_independent_split(3, 4, 0), std::invalid_argument);
}

TEST_CASE("as_independent_split determinism", "[split]") {
  auto a = as_independent_split(37, 4, 123456);
  auto b = as_independent_split(37, 4, 123456);
  CHECK(a.to_json().dump() == b.to_json().dump());
  auto c = as_independent_split(37, 4, 123457);
  CHECK(a.to_json().dump() != c.to_json().dump());
}

TEST_CASE("two_way_split on the 2x2 grid", "[split]") {
  // cells row-major: (1,1)=0 (1,2)=1 (2,1)=2 (2,2)=3
  std::vector<int> rows{1, 1, 2, 2}, cols{1, 2, 1, 2};
  auto p = two_way_split(rows, cols, 2, 5);
  REQUIRE(p.folds.size() == 4);
  CHECK(xfit_checks::check_partition(p).empty());
  CHECK(xfit_checks::check_two_way_exclusion(p, rows, cols).empty());

  // the fold holding out (row 1, col 1) evaluates exactly cell 0 and trains on cell 3
  bool found = false;
  for (const auto& f : p.folds)
    if (f.eval == std::vector<int>{0}) {
      found = true;
      CHECK(f.train == std::vector<int>{3});
    }
  CHECK(found);
}

TEST_CASE("two_way_split on the 4x4 grid", "[split]") {
  std::vector<int> rows, cols;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      rows.push_back(r);
      cols.push_back(c);
    }
  auto p = two_way_split(rows, cols, 2, 11);
  REQUIRE(p.folds.size() == 4);
  for (const auto& f : p.folds) {
    CHECK(f.eval.size() == 4);
    CHECK(f.train.size() == 4);  // 8 cells unused per fold
  }
  CHECK(xfit_checks::check_partition(p).empty());
  CHECK(xfit_checks::check_two_way_exclusion(p, rows, cols).empty());
}

TEST_CASE("two_way_split preconditions", "[split]") {
  CHECK_THROWS_AS(two_way_split({1, 1, 1}, {1, 2, 3}, 2, 0), std::invalid_argument);
  CHECK_THROWS_AS(two_way_split({1, 2}, {1, 2}, 1, 0), std::invalid_argument);
}

TEST_CASE("network_lno_split equals as_independent on the empty graph", "[split]") {
  auto g = DependenceStructure::network(6, {});
  auto lno = network_lno_split(g, 3, 42);
  auto ai = as_independent_split(6, 3, 42);
  REQUIRE(lno.folds.size() == ai.folds.size());
  for (std::size_t i = 0; i < lno.folds.size(); ++i) {
    CHECK(lno.folds[i].eval == ai.folds[i].eval);
    CHECK(lno.folds[i].train == ai.folds[i].train);
  }
}

TEST_CASE("network_lno_split drops neighbors of the eval fold", "[split]") {
  // star 0-{1..4} plus isolated units 5,6 so trains stay non-empty
  auto g = DependenceStructure::network(
      7, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  int planned = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    xfit::SplitPlan p;
    try {
      p = network_lno_split(g, 2, seed);
    } catch (const EmptyTrainingFold&) {
      continue;  // center's fold also swallowed both isolated units
    }
    ++planned;
    CHECK(xfit_checks::check_partition(p).empty());
    CHECK(xfit_checks::check_network_exclusion(p, g).empty());
    for (const auto& f : p.folds) {
      const bool center_in_eval =
          std::find(f.eval.begin(), f.eval.end(), 0) != f.eval.end();
      if (center_in_eval)
        for (int u : f.train) CHECK(u >= 5);  // only isolated units survive
    }
  }
  CHECK(planned > 0);

  // pure star: any fold holding the center empties its train set
  auto star = DependenceStructure::network(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  CHECK_THROWS_AS(network_lno_split(star, 2, 3), EmptyTrainingFold);

  auto complete = DependenceStructure::network(
      4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  CHECK_THROWS_AS(network_lno_split(complete, 2, 0), EmptyTrainingFold);
}

TEST_CASE("nlo_split hand enumeration T=10 k=2 m=1", "[split]") {
  auto p = nlo_split(10, 2, 1, 0);
  REQUIRE(p.folds.size() == 2);
  CHECK(p.folds[0].eval == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(p.folds[0].train == std::vector<int>{6, 7, 8, 9});
  CHECK(p.folds[1].eval == std::vector<int>{5, 6, 7, 8, 9});
  CHECK(p.folds[1].train == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("nlo_split zero gap reduces to contiguous complements", "[split]") {
  auto p = nlo_split(9, 3, 0, 0);
  for (const auto& f : p.folds) {
    auto complement = xfit::detail::sorted_complement(f.eval, 9);
    CHECK(f.train == complement);
  }
  CHECK_THROWS(nlo_split(5, 2, 4, 0));
}

TEST_CASE("splitter property suite over random configurations", "[split][property]") {
  Rng rng(20250311);
  int ai_ok = 0, tw_ok = 0, net_ok = 0, nlo_ok = 0;

  while (ai_ok < 120) {
    const std::size_t n = 2 + rng.below(499);
    const int k = 2 + static_cast<int>(rng.below(std::min<std::uint64_t>(n - 1, 9)));
    auto p = as_independent_split(n, k, rng.next_u64());
    REQUIRE(xfit_checks::check_partition(p).empty());
    ++ai_ok;
  }

  while (tw_ok < 120) {
    const int nr = 2 + static_cast<int>(rng.below(12));
    const int nc = 2 + static_cast<int>(rng.below(12));
    const int K = 2 + static_cast<int>(rng.below(std::min(nr, nc) - 1));
    std::vector<int> rows, cols;
    for (int r = 0; r < nr; ++r)
      for (int c = 0; c < nc; ++c)
        if (rng.uniform() < 0.8) {
          rows.push_back(r * 7 + 3);  // arbitrary non-contiguous ids
          cols.push_back(c * 3 + 1);
        }
    if (rows.empty()) continue;
    try {
      auto p = two_way_split(rows, cols, K, rng.next_u64());
      REQUIRE(xfit_checks::check_partition(p).empty());
      REQUIRE(xfit_checks::check_two_way_exclusion(p, rows, cols).empty());
      ++tw_ok;
    } catch (const std::invalid_argument&) {
    } catch (const EmptyTrainingFold&) {
    }
  }

  while (net_ok < 120) {
    const std::size_t n = 10 + rng.below(491);
    std::vector<std::pair<int, int>> edges;
    const double pe = 2.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng.uniform() < pe)
          edges.push_back({static_cast<int>(i), static_cast<int>(j)});
    auto g = DependenceStructure::network(n, edges);
    try {
      auto p = network_lno_split(g, 2 + static_cast<int>(rng.below(3)), rng.next_u64());
      REQUIRE(xfit_checks::check_partition(p).empty());
      REQUIRE(xfit_checks::check_network_exclusion(p, g).empty());
      ++net_ok;
    } catch (const EmptyTrainingFold&) {
    }
  }

  while (nlo_ok < 120) {
    const int gap = static_cast<int>(rng.below(6));
    const int k = 2 + static_cast<int>(rng.below(4));
    const std::size_t T = static_cast<std::size_t>(k) * (gap + 2) + rng.below(400);
    auto p = nlo_split(T, k, gap, rng.next_u64());
    REQUIRE(xfit_checks::check_partition(p).empty());
    REQUIRE(xfit_checks::check_nlo_exclusion(p, gap).empty());
    ++nlo_ok;
  }
}
