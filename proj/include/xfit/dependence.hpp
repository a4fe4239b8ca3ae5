#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace xfit {

// Which unordered unit pairs are treated as (potentially) correlated.
// Immutable after construction; all queries are const.
class DependenceStructure {
 public:
  enum class Kind { independent, one_way, two_way, network, time_series };

  static DependenceStructure independent(std::size_t n) {
    DependenceStructure s;
    s.kind_ = Kind::independent;
    s.n_ = check_n(n);
    return s;
  }

  static DependenceStructure one_way(std::vector<int> cluster) {
    DependenceStructure s;
    s.kind_ = Kind::one_way;
    s.n_ = check_n(cluster.size());
    s.row_id_ = std::move(cluster);
    s.row_groups_ = group_members(s.row_id_);
    return s;
  }

  static DependenceStructure two_way(std::vector<int> row_id, std::vector<int> col_id) {
    if (row_id.size() != col_id.size())
      throw std::invalid_argument("DependenceStructure: row/col id length mismatch");
    DependenceStructure s;
    s.kind_ = Kind::two_way;
    s.n_ = check_n(row_id.size());
    s.row_id_ = std::move(row_id);
    s.col_id_ = std::move(col_id);
    s.row_groups_ = group_members(s.row_id_);
    s.col_groups_ = group_members(s.col_id_);
    return s;
  }

  // Edges as unordered unit-index pairs; symmetry enforced here, input not trusted.
  static DependenceStructure network(std::size_t n,
                                     const std::vector<std::pair<int, int>>& edges) {
    DependenceStructure s;
    s.kind_ = Kind::network;
    s.n_ = check_n(n);
    s.adj_.assign(n, {});
    for (const auto& [u, v] : edges) {
      if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n ||
          static_cast<std::size_t>(v) >= n)
        throw std::invalid_argument("DependenceStructure: edge endpoint out of range");
      if (u == v)
        throw std::invalid_argument("DependenceStructure: self-loop violates zero diagonal");
      s.adj_[u].push_back(v);
      s.adj_[v].push_back(u);
    }
    for (auto& nbrs : s.adj_) {
      std::sort(nbrs.begin(), nbrs.end());
      nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }
    return s;
  }

  // Unit order is time order; no timestamp column.
  static DependenceStructure time_series(std::size_t n, int m) {
    if (m < 0) throw std::invalid_argument("DependenceStructure: m must be >= 0");
    DependenceStructure s;
    s.kind_ = Kind::time_series;
    s.n_ = check_n(n);
    s.m_ = m;
    return s;
  }

  Kind kind() const { return kind_; }
  std::size_t n() const { return n_; }
  int m_order() const { return m_; }
  const std::vector<int>& row_ids() const { return row_id_; }
  const std::vector<int>& col_ids() const { return col_id_; }
  const std::vector<std::vector<int>>& adjacency() const { return adj_; }

  bool correlated(int i, int j) const {
    check_index(i);
    check_index(j);
    if (i == j) return false;
    switch (kind_) {
      case Kind::independent: return false;
      case Kind::one_way: return row_id_[i] == row_id_[j];
      case Kind::two_way: return row_id_[i] == row_id_[j] || col_id_[i] == col_id_[j];
      case Kind::network:
        return std::binary_search(adj_[i].begin(), adj_[i].end(), j);
      case Kind::time_series: return std::abs(i - j) <= m_;
    }
    return false;
  }

  // Sorted, never contains i itself.
  std::vector<int> neighbors(int i) const {
    check_index(i);
    std::vector<int> out;
    switch (kind_) {
      case Kind::independent:
        break;
      case Kind::one_way:
        append_group(row_groups_, row_id_[i], i, out);
        break;
      case Kind::two_way: {
        append_group(row_groups_, row_id_[i], i, out);
        append_group(col_groups_, col_id_[i], i, out);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        break;
      }
      case Kind::network:
        out = adj_[i];
        break;
      case Kind::time_series: {
        const int lo = std::max(0, i - m_);
        const int hi = std::min(static_cast<int>(n_) - 1, i + m_);
        for (int t = lo; t <= hi; ++t)
          if (t != i) out.push_back(t);
        break;
      }
    }
    return out;
  }

  std::size_t max_degree() const {
    std::size_t best = 0;
    for (std::size_t i = 0; i < n_; ++i)
      best = std::max(best, neighbors(static_cast<int>(i)).size());
    return best;
  }

  // |{(i,j): i<j, correlated}|
  unsigned long long correlated_pairs() const {
    switch (kind_) {
      case Kind::independent:
        return 0;
      case Kind::one_way:
        return pairs_within(row_groups_);
      case Kind::two_way: {
        // share row OR col; units duplicated on both ids would be double counted
        unsigned long long both = 0;
        std::map<std::pair<int, int>, unsigned long long> cells;
        for (std::size_t i = 0; i < n_; ++i) ++cells[{row_id_[i], col_id_[i]}];
        for (const auto& [key, c] : cells) both += c * (c - 1) / 2;
        return pairs_within(row_groups_) + pairs_within(col_groups_) - both;
      }
      case Kind::network: {
        unsigned long long deg_sum = 0;
        for (const auto& nbrs : adj_) deg_sum += nbrs.size();
        return deg_sum / 2;
      }
      case Kind::time_series: {
        unsigned long long total = 0;
        const long long nn = static_cast<long long>(n_);
        for (long long d = 1; d <= std::min<long long>(m_, nn - 1); ++d)
          total += static_cast<unsigned long long>(nn - d);
        return total;
      }
    }
    return 0;
  }

  std::string kind_name() const {
    switch (kind_) {
      case Kind::independent: return "independent";
      case Kind::one_way: return "one_way_clustered";
      case Kind::two_way: return "two_way_clustered";
      case Kind::network: return "network";
      case Kind::time_series: return "time_series_m_dependent";
    }
    return "?";
  }

 private:
  DependenceStructure() = default;

  static std::size_t check_n(std::size_t n) {
    if (n < 1) throw std::invalid_argument("DependenceStructure: need at least one unit");
    return n;
  }

  void check_index(int i) const {
    if (i < 0 || static_cast<std::size_t>(i) >= n_)
      throw std::out_of_range("DependenceStructure: unit index out of range");
  }

  static std::map<int, std::vector<int>> group_members(const std::vector<int>& ids) {
    std::map<int, std::vector<int>> g;
    for (std::size_t i = 0; i < ids.size(); ++i)
      g[ids[i]].push_back(static_cast<int>(i));
    return g;
  }

  static void append_group(const std::map<int, std::vector<int>>& groups, int id,
                           int self, std::vector<int>& out) {
    const auto& members = groups.at(id);
    for (int u : members)
      if (u != self) out.push_back(u);
  }

  static unsigned long long pairs_within(const std::map<int, std::vector<int>>& groups) {
    unsigned long long total = 0;
    for (const auto& [id, members] : groups) {
      const unsigned long long c = members.size();
      total += c * (c - 1) / 2;
    }
    return total;
  }

  Kind kind_ = Kind::independent;
  std::size_t n_ = 0;
  int m_ = 0;
  std::vector<int> row_id_, col_id_;
  std::map<int, std::vector<int>> row_groups_, col_groups_;
  std::vector<std::vector<int>> adj_;
};

}  // namespace xfit
