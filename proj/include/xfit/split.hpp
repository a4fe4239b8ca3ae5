#pragma once

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "xfit/dependence.hpp"
#include "xfit/errors.hpp"
#include "xfit/rng.hpp"

namespace xfit {

struct Fold {
  std::vector<int> eval;   // sorted, scored exactly once across folds
  std::vector<int> train;  // sorted, disjoint from eval
};

struct SplitPlan {
  std::string scheme;
  int k = 0;  // fold-count parameter (K for two_way; K^2 folds there)
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::vector<Fold> folds;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["scheme"] = scheme;
    j["k"] = k;
    j["seed"] = seed;
    j["n"] = n;
    j["folds"] = nlohmann::ordered_json::array();
    for (const auto& f : folds)
      j["folds"].push_back({{"eval", f.eval}, {"train", f.train}});
    return j;
  }

  // partition + disjointness checks shared by tests and the estimator
  void validate() const {
    std::vector<int> all;
    for (const auto& f : folds) {
      all.insert(all.end(), f.eval.begin(), f.eval.end());
      std::set<int> ev(f.eval.begin(), f.eval.end());
      for (int t : f.train)
        if (ev.count(t))
          throw std::logic_error("SplitPlan: train intersects eval");
      if (f.train.empty())
        throw EmptyTrainingFold("SplitPlan: fold with empty train set");
    }
    std::sort(all.begin(), all.end());
    if (all.size() != n)
      throw std::logic_error("SplitPlan: eval sets do not cover all units exactly once");
    for (std::size_t i = 0; i < all.size(); ++i)
      if (all[i] != static_cast<int>(i))
        throw std::logic_error("SplitPlan: eval sets do not partition 0..n-1");
  }
};

namespace detail {

inline std::vector<int> sorted_complement(const std::vector<int>& sorted_in,
                                          std::size_t n) {
  std::vector<int> out;
  out.reserve(n - sorted_in.size());
  std::size_t pos = 0;
  for (int i = 0; i < static_cast<int>(n); ++i) {
    if (pos < sorted_in.size() && sorted_in[pos] == i)
      ++pos;
    else
      out.push_back(i);
  }
  return out;
}

// shuffle 0..n-1 and cut into k chunks whose sizes differ by at most one
inline std::vector<std::vector<int>> random_chunks(std::size_t n, int k, Rng& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  std::vector<std::vector<int>> chunks(k);
  for (int f = 0; f < k; ++f) {
    const std::size_t b1 = n * f / k, b2 = n * (f + 1) / k;
    chunks[f].assign(idx.begin() + b1, idx.begin() + b2);
    std::sort(chunks[f].begin(), chunks[f].end());
  }
  return chunks;
}

}  // namespace detail

// Uniformly random k-fold rotation that ignores the dependence structure.
inline SplitPlan as_independent_split(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("as_independent_split: k must be >= 2");
  if (static_cast<std::size_t>(k) > n)
    throw std::invalid_argument("as_independent_split: k exceeds unit count");
  Rng rng(seed);
  SplitPlan plan{"as_independent", k, seed, n, {}};
  for (auto& eval : detail::random_chunks(n, k, rng)) {
    Fold f;
    f.train = detail::sorted_complement(eval, n);
    f.eval = std::move(eval);
    plan.folds.push_back(std::move(f));
  }
  return plan;
}

// Hold out a row-block x column-block; train on the complementary blocks.
// Cells sharing a row or column with the eval block are never trained on.
inline SplitPlan two_way_split(const std::vector<int>& row_ids,
                               const std::vector<int>& col_ids, int K,
                               std::uint64_t seed) {
  if (K < 2) throw std::invalid_argument("two_way_split: K must be >= 2");
  if (row_ids.size() != col_ids.size() || row_ids.empty())
    throw std::invalid_argument("two_way_split: bad id vectors");
  const std::size_t n = row_ids.size();

  std::vector<int> rows(row_ids), cols(col_ids);
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  if (rows.size() < static_cast<std::size_t>(K))
    throw std::invalid_argument("two_way_split: fewer than K distinct rows");
  if (cols.size() < static_cast<std::size_t>(K))
    throw std::invalid_argument("two_way_split: fewer than K distinct columns");

  Rng rng(seed);
  rng.shuffle(rows);
  rng.shuffle(cols);
  // block index per distinct id; chunk boundaries as in random_chunks
  auto block_of = [K](const std::vector<int>& ids) {
    std::map<int, int> b;
    const std::size_t sz = ids.size();
    for (int f = 0; f < K; ++f)
      for (std::size_t i = sz * f / K; i < sz * (f + 1) / K; ++i) b[ids[i]] = f;
    return b;
  };
  const auto row_block = block_of(rows);
  const auto col_block = block_of(cols);

  SplitPlan plan{"two_way", K, seed, n, {}};
  for (int a = 0; a < K; ++a)
    for (int b = 0; b < K; ++b) {
      Fold f;
      for (std::size_t i = 0; i < n; ++i) {
        const int ra = row_block.at(row_ids[i]), cb = col_block.at(col_ids[i]);
        if (ra == a && cb == b)
          f.eval.push_back(static_cast<int>(i));
        else if (ra != a && cb != b)
          f.train.push_back(static_cast<int>(i));
      }
      if (f.train.empty())
        throw EmptyTrainingFold("two_way_split: empty train for block (" +
                                std::to_string(a) + "," + std::to_string(b) + ")");
      plan.folds.push_back(std::move(f));
    }
  return plan;
}

// As-independent eval folds; training folds drop every unit adjacent to the
// eval fold in the network.
inline SplitPlan network_lno_split(const DependenceStructure& structure, int k,
                                   std::uint64_t seed) {
  if (structure.kind() != DependenceStructure::Kind::network)
    throw std::invalid_argument("network_lno_split: structure is not a network");
  const std::size_t n = structure.n();
  SplitPlan plan = as_independent_split(n, k, seed);
  plan.scheme = "network_lno";
  for (std::size_t fi = 0; fi < plan.folds.size(); ++fi) {
    auto& f = plan.folds[fi];
    std::vector<char> in_eval(n, 0);
    for (int e : f.eval) in_eval[e] = 1;
    std::vector<int> kept;
    for (int u : f.train) {
      bool touches = false;
      for (int v : structure.adjacency()[u])
        if (in_eval[v]) { touches = true; break; }
      if (!touches) kept.push_back(u);
    }
    if (kept.empty())
      throw EmptyTrainingFold("network_lno_split: fold " + std::to_string(fi) +
                              " train set empty after dropping neighbors");
    f.train = std::move(kept);
  }
  return plan;
}

// Contiguous eval blocks in time order; train keeps only points more than
// `gap` steps away from the eval block. Deterministic; seed recorded only.
inline SplitPlan nlo_split(std::size_t T, int k, int gap, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("nlo_split: k must be >= 2");
  if (gap < 0) throw std::invalid_argument("nlo_split: gap must be >= 0");
  if (T < static_cast<std::size_t>(k) * (gap + 2))
    throw std::invalid_argument("nlo_split: series too short for k blocks with gap " +
                                std::to_string(gap));
  SplitPlan plan{"nlo", k, seed, T, {}};
  for (int f = 0; f < k; ++f) {
    const long long b1 = static_cast<long long>(T) * f / k;
    const long long b2 = static_cast<long long>(T) * (f + 1) / k;
    Fold fold;
    for (long long t = b1; t < b2; ++t) fold.eval.push_back(static_cast<int>(t));
    for (long long t = 0; t < static_cast<long long>(T); ++t)
      if (t < b1 - gap || t >= b2 + gap) fold.train.push_back(static_cast<int>(t));
    if (fold.train.empty())
      throw EmptyTrainingFold("nlo_split: fold " + std::to_string(f) +
                              " train set empty");
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

// A scheme can only be applied to data whose dependence structure carries the
// side information it needs (cluster ids, the graph, the series order).
inline bool scheme_compatible(const std::string& scheme,
                              DependenceStructure::Kind kind) {
  if (scheme == "as_independent") return true;
  if (scheme == "two_way") return kind == DependenceStructure::Kind::two_way;
  if (scheme == "network_lno") return kind == DependenceStructure::Kind::network;
  if (scheme == "nlo") return kind == DependenceStructure::Kind::time_series;
  return false;
}

inline SplitPlan make_split(const std::string& scheme,
                            const DependenceStructure& structure, int k,
                            std::uint64_t seed) {
  if (!scheme_compatible(scheme, structure.kind()))
    throw std::invalid_argument("scheme " + scheme +
                                " is incompatible with a " +
                                structure.kind_name() + " structure");
  if (scheme == "as_independent") return as_independent_split(structure.n(), k, seed);
  if (scheme == "two_way")
    return two_way_split(structure.row_ids(), structure.col_ids(), k, seed);
  if (scheme == "network_lno") return network_lno_split(structure, k, seed);
  return nlo_split(structure.n(), k, structure.m_order(), seed);
}

}  // namespace xfit
