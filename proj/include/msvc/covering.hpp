#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace msvc {

/// Work assignment for k servers over a row shares of the matrix and b column
/// shares of the input. Server l (1-based) stores the row shares listed in
/// A[l-1], receives the column shares in B[l-1], and is responsible for the
/// output pairs in C[l-1]. Indices are 1-based; sets are sorted ascending and
/// duplicate-free; pair lists are sorted lexicographically.
///
/// A valid assignment must satisfy, in the order check_covering() tests them:
///   row-set-proper:    each A[l] is a proper subset of {1..a}
///   column-set-proper: each B[l] is a proper subset of {1..b}
///   pair-coverage:     every (u,v) lies in some A[l] x B[l]
///   pair-ownership:    C[l] stays inside A[l] x B[l]
///   pair-partition:    the C[l] partition {1..a} x {1..b}
struct CoveringScheme {
  int k = 0, a = 0, b = 0;
  std::vector<std::vector<int>> A, B;
  std::vector<std::vector<std::pair<int, int>>> C;

  bool operator==(const CoveringScheme&) const = default;
};

namespace detail {

inline bool sorted_unique_in_range(const std::vector<int>& v, int hi) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 1 || v[i] > hi) return false;
    if (i > 0 && v[i] <= v[i - 1]) return false;
  }
  return true;
}

inline std::string pair_str(int u, int v) {
  std::ostringstream os;
  os << "(" << u << "," << v << ")";
  return os.str();
}

}  // namespace detail

/// Returns the name and detail of the first violated rule, or nullopt if the
/// scheme is valid. Rules are checked in the order listed on CoveringScheme,
/// after basic shape checks.
inline std::optional<std::string> check_covering(const CoveringScheme& s) {
  if (s.k < 1 || s.a < 1 || s.b < 1) return "shape: k, a, b must be positive";
  if (static_cast<int>(s.A.size()) != s.k ||
      static_cast<int>(s.B.size()) != s.k ||
      static_cast<int>(s.C.size()) != s.k)
    return "shape: A, B, C must each list one entry per server";
  for (int l = 0; l < s.k; ++l) {
    if (!detail::sorted_unique_in_range(s.A[l], s.a))
      return "index-order: A[" + std::to_string(l + 1) +
             "] must be sorted, duplicate-free, within 1.." +
             std::to_string(s.a);
    if (!detail::sorted_unique_in_range(s.B[l], s.b))
      return "index-order: B[" + std::to_string(l + 1) +
             "] must be sorted, duplicate-free, within 1.." +
             std::to_string(s.b);
    for (std::size_t i = 0; i < s.C[l].size(); ++i) {
      const auto& [u, v] = s.C[l][i];
      if (u < 1 || u > s.a || v < 1 || v > s.b)
        return "index-order: C[" + std::to_string(l + 1) + "] contains " +
               detail::pair_str(u, v) + " outside the grid";
      if (i > 0 && !(s.C[l][i - 1] < s.C[l][i]))
        return "index-order: C[" + std::to_string(l + 1) +
               "] must be sorted lexicographically without duplicates";
    }
  }
  for (int l = 0; l < s.k; ++l) {
    if (static_cast<int>(s.A[l].size()) >= s.a)
      return "row-set-proper: A[" + std::to_string(l + 1) +
             "] must omit at least one row share";
    if (static_cast<int>(s.B[l].size()) >= s.b)
      return "column-set-proper: B[" + std::to_string(l + 1) +
             "] must omit at least one column share";
  }
  std::vector<int> owner(static_cast<std::size_t>(s.a * s.b), 0);
  auto cell = [&s](int u, int v) -> std::size_t {
    return static_cast<std::size_t>((u - 1) * s.b + (v - 1));
  };
  for (int u = 1; u <= s.a; ++u) {
    for (int v = 1; v <= s.b; ++v) {
      bool covered = false;
      for (int l = 0; l < s.k && !covered; ++l) {
        covered = std::binary_search(s.A[l].begin(), s.A[l].end(), u) &&
                  std::binary_search(s.B[l].begin(), s.B[l].end(), v);
      }
      if (!covered)
        return "pair-coverage: " + detail::pair_str(u, v) +
               " is served by no A[l] x B[l]";
    }
  }
  for (int l = 0; l < s.k; ++l) {
    for (const auto& [u, v] : s.C[l]) {
      if (!std::binary_search(s.A[l].begin(), s.A[l].end(), u) ||
          !std::binary_search(s.B[l].begin(), s.B[l].end(), v))
        return "pair-ownership: C[" + std::to_string(l + 1) + "] claims " +
               detail::pair_str(u, v) + " outside A[l] x B[l]";
      if (owner[cell(u, v)] != 0)
        return "pair-partition: " + detail::pair_str(u, v) +
               " assigned to servers " + std::to_string(owner[cell(u, v)]) +
               " and " + std::to_string(l + 1);
      owner[cell(u, v)] = l + 1;
    }
  }
  for (int u = 1; u <= s.a; ++u)
    for (int v = 1; v <= s.b; ++v)
      if (owner[cell(u, v)] == 0)
        return "pair-partition: " + detail::pair_str(u, v) +
               " assigned to no server";
  return std::nullopt;
}

inline void validate_covering(const CoveringScheme& s) {
  if (auto violation = check_covering(s))
    throw std::invalid_argument("covering: " + *violation);
}

/// Assigns every (u,v) to the lowest-indexed server able to compute it.
inline std::vector<std::vector<std::pair<int, int>>> derive_partition(
    int a, int b, const std::vector<std::vector<int>>& A,
    const std::vector<std::vector<int>>& B) {
  if (A.size() != B.size())
    throw std::invalid_argument("covering: A and B must pair up per server");
  std::vector<std::vector<std::pair<int, int>>> C(A.size());
  for (int u = 1; u <= a; ++u) {
    for (int v = 1; v <= b; ++v) {
      bool placed = false;
      for (std::size_t l = 0; l < A.size() && !placed; ++l) {
        if (std::binary_search(A[l].begin(), A[l].end(), u) &&
            std::binary_search(B[l].begin(), B[l].end(), v)) {
          C[l].emplace_back(u, v);
          placed = true;
        }
      }
      if (!placed)
        throw std::invalid_argument("covering: pair " + detail::pair_str(u, v) +
                                    " is served by no A[l] x B[l]");
    }
  }
  return C;
}

/// Builds and validates a scheme from its row/column sets, deriving the
/// output partition by the lowest-index rule.
inline CoveringScheme make_covering(int a, int b,
                                    std::vector<std::vector<int>> A,
                                    std::vector<std::vector<int>> B) {
  CoveringScheme s;
  s.k = static_cast<int>(A.size());
  s.a = a;
  s.b = b;
  s.A = std::move(A);
  s.B = std::move(B);
  s.C = derive_partition(a, b, s.A, s.B);
  validate_covering(s);
  return s;
}

/// Three-server scheme on a 3x3 share grid: the strong tradeoff point, the
/// fewest servers any proper-subset assignment can have.
inline CoveringScheme pi_s() {
  CoveringScheme s;
  s.k = 3;
  s.a = 3;
  s.b = 3;
  s.A = {{1, 2}, {1, 3}, {2, 3}};
  s.B = {{1, 2}, {1, 3}, {2, 3}};
  s.C = {{{1, 1}, {1, 2}, {2, 1}, {2, 2}},
         {{1, 3}, {3, 1}, {3, 3}},
         {{2, 3}, {3, 2}}};
  return s;
}

/// Four-server scheme on a 2x2 share grid: the smallest share grid, each
/// server holding a single row/column share and computing one pair.
inline CoveringScheme pi_w() {
  CoveringScheme s;
  s.k = 4;
  s.a = 2;
  s.b = 2;
  s.A = {{1}, {1}, {2}, {2}};
  s.B = {{1}, {2}, {1}, {2}};
  s.C = {{{1, 1}}, {{1, 2}}, {{2, 1}}, {{2, 2}}};
  return s;
}

/// One server's view of a scheme, as shipped in setup messages.
struct SchemeSlice {
  int k = 0, a = 0, b = 0;
  int server_index = 0;  // 1-based
  std::vector<int> A, B;
  std::vector<std::pair<int, int>> C;

  bool operator==(const SchemeSlice&) const = default;
};

inline SchemeSlice slice_for(const CoveringScheme& s, int l) {
  if (l < 1 || l > s.k)
    throw std::invalid_argument("covering: server index out of range");
  return SchemeSlice{s.k,          s.a,
                     s.b,          l,
                     s.A[static_cast<std::size_t>(l - 1)],
                     s.B[static_cast<std::size_t>(l - 1)],
                     s.C[static_cast<std::size_t>(l - 1)]};
}

namespace detail {

// Subset-pair search. Candidate per-server choices are all (nonempty proper
// row subset, nonempty proper column subset) pairs; each covers a bitmask of
// the a*b grid cells. Server order carries no meaning, so the search picks
// candidate indices in non-decreasing order.
struct CoverCandidates {
  int a, b;
  std::vector<std::uint32_t> amask, bmask;
  std::vector<std::uint64_t> pairmask;
  std::uint64_t full;
};

inline CoverCandidates cover_candidates(int a, int b) {
  if (a < 2 || b < 2)
    throw std::invalid_argument(
        "covering: search needs a >= 2 and b >= 2 (single-share sides admit "
        "no proper-subset scheme)");
  if (a * b > 64)
    throw std::invalid_argument("covering: search limited to a*b <= 64");
  CoverCandidates c;
  c.a = a;
  c.b = b;
  c.full = (a * b == 64) ? ~0ull : ((1ull << (a * b)) - 1);
  for (std::uint32_t am = 1; am + 1 < (1u << a); ++am) {
    for (std::uint32_t bm = 1; bm + 1 < (1u << b); ++bm) {
      std::uint64_t pm = 0;
      for (int u = 0; u < a; ++u)
        if (am >> u & 1) pm |= static_cast<std::uint64_t>(bm) << (u * b);
      c.amask.push_back(am);
      c.bmask.push_back(bm);
      c.pairmask.push_back(pm);
    }
  }
  return c;
}

inline bool cover_dfs(const CoverCandidates& c,
                      const std::vector<std::uint64_t>& suffix_or,
                      std::uint64_t acc, std::size_t start, int remaining,
                      std::vector<std::size_t>& picked) {
  if (remaining == 0) return acc == c.full;
  if ((acc | suffix_or[start]) != c.full) return false;
  if (acc == c.full) {
    // any candidates work now; repeat the current position
    picked.insert(picked.end(), static_cast<std::size_t>(remaining), start);
    return true;
  }
  for (std::size_t i = start; i < c.pairmask.size(); ++i) {
    picked.push_back(i);
    if (cover_dfs(c, suffix_or, acc | c.pairmask[i], i, remaining - 1, picked))
      return true;
    picked.pop_back();
  }
  return false;
}

inline std::vector<int> bits_to_set(std::uint32_t mask) {
  std::vector<int> out;
  for (int i = 0; mask >> i; ++i)
    if (mask >> i & 1) out.push_back(i + 1);
  return out;
}

}  // namespace detail

/// Searches for a valid scheme using exactly k servers on an a x b grid.
inline std::optional<CoveringScheme> find_covering(int k, int a, int b) {
  if (k < 1) throw std::invalid_argument("covering: k must be positive");
  const auto c = detail::cover_candidates(a, b);
  std::vector<std::uint64_t> suffix_or(c.pairmask.size() + 1, 0);
  for (std::size_t i = c.pairmask.size(); i-- > 0;)
    suffix_or[i] = suffix_or[i + 1] | c.pairmask[i];
  std::vector<std::size_t> picked;
  if (!detail::cover_dfs(c, suffix_or, 0, 0, k, picked)) return std::nullopt;
  std::vector<std::vector<int>> A, B;
  for (std::size_t i : picked) {
    A.push_back(detail::bits_to_set(c.amask[i]));
    B.push_back(detail::bits_to_set(c.bmask[i]));
  }
  return make_covering(a, b, std::move(A), std::move(B));
}

/// Smallest k admitting a valid scheme on an a x b grid, with a witness.
/// A scheme that assigns each pair to its own server always exists with
/// k = a*b, so the search terminates.
struct MinServersResult {
  int k = 0;
  CoveringScheme scheme;
};

inline MinServersResult search_min_k(int a, int b) {
  for (int k = 1; k <= a * b; ++k) {
    if (auto s = find_covering(k, a, b)) return {k, std::move(*s)};
  }
  throw std::logic_error("covering: single-pair fallback scheme not found");
}

/// Smallest share grid a*b admitting a valid scheme with exactly k servers,
/// with a witness. Grids are scanned in increasing product order with sides
/// between 2 and 8; nullopt means no grid within the cap works.
struct MinGridResult {
  int a = 0, b = 0;
  CoveringScheme scheme;
};

inline std::optional<MinGridResult> search_min_ab(int k, int product_cap = 24) {
  for (int w = 4; w <= product_cap; ++w) {
    for (int a = 2; a * a <= w && a <= 8; ++a) {
      if (w % a != 0) continue;
      const int b = w / a;
      if (b < 2 || b > 8) continue;
      if (auto s = find_covering(k, a, b)) return MinGridResult{a, b, *s};
    }
  }
  return std::nullopt;
}

/// JSON form: {"k":.., "a":.., "b":.., "A":[[..]..], "B":[[..]..],
/// "C":[[[u,v]..]..]}, all indices 1-based.
inline nlohmann::json scheme_to_json(const CoveringScheme& s) {
  nlohmann::json j;
  j["k"] = s.k;
  j["a"] = s.a;
  j["b"] = s.b;
  j["A"] = s.A;
  j["B"] = s.B;
  auto& c = j["C"] = nlohmann::json::array();
  for (const auto& cl : s.C) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [u, v] : cl) pairs.push_back({u, v});
    c.push_back(std::move(pairs));
  }
  return j;
}

inline CoveringScheme scheme_from_json(const nlohmann::json& j) {
  CoveringScheme s;
  try {
    s.k = j.at("k").get<int>();
    s.a = j.at("a").get<int>();
    s.b = j.at("b").get<int>();
    s.A = j.at("A").get<std::vector<std::vector<int>>>();
    s.B = j.at("B").get<std::vector<std::vector<int>>>();
    for (const auto& cl : j.at("C")) {
      std::vector<std::pair<int, int>> pairs;
      for (const auto& p : cl) {
        if (!p.is_array() || p.size() != 2)
          throw std::invalid_argument("covering: C entries must be [u,v]");
        pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
      }
      s.C.push_back(std::move(pairs));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("covering: bad scheme json: ") +
                                e.what());
  }
  validate_covering(s);
  return s;
}

}  // namespace msvc
