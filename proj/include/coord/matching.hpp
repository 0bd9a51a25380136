#pragma once

// Minimum-cost bipartite matching (Hungarian method, O(n^3) shortest
// augmenting paths with row/column potentials).
//
// Entries may be INFEASIBLE. The solver first maximises the number of matched
// rows using feasible entries only, then minimises cost among those
// matchings. Ties are broken lexicographically: row 0 takes the smallest
// column compatible with optimality, then row 1, and so on.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace coord {

using Cost = std::optional<double>;
inline constexpr std::nullopt_t kInfeasible = std::nullopt;

class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, Cost fill = kInfeasible)
      : rows_(rows), cols_(cols), v_(rows * cols, fill) {}
  CostMatrix(std::initializer_list<std::initializer_list<Cost>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    for (const auto& row : init) {
      if (row.size() != cols_) throw std::invalid_argument("ragged cost matrix");
      v_.insert(v_.end(), row.begin(), row.end());
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const Cost& operator()(std::size_t i, std::size_t j) const { return v_[i * cols_ + j]; }
  Cost& operator()(std::size_t i, std::size_t j) { return v_[i * cols_ + j]; }

  bool operator==(const CostMatrix&) const = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<Cost> v_;
};

struct MatchResult {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // sorted by row
  double total_cost = 0.0;
};

struct PaddedMatrix {
  CostMatrix square;
  std::size_t rows = 0;  // original dimensions; larger indices are padding
  std::size_t cols = 0;

  bool is_padding(std::size_t i, std::size_t j) const { return i >= rows || j >= cols; }
};

// Squares the matrix with INFEASIBLE sentinel rows or columns.
inline PaddedMatrix rectangular_pad(const CostMatrix& m) {
  std::size_t n = std::max(m.rows(), m.cols());
  PaddedMatrix out{CostMatrix(n, n, kInfeasible), m.rows(), m.cols()};
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out.square(i, j) = m(i, j);
  return out;
}

namespace detail {

// Square dense assignment. Returns row->col and the dual potentials
// (u for rows, v for columns), both 1-based with index 0 unused.
struct DenseAssignment {
  std::vector<std::size_t> row_col;
  std::vector<double> u, v;
};

inline DenseAssignment solve_dense(const std::vector<double>& a, std::size_t n) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      std::size_t i0 = p[j0], j1 = 0;
      double delta = inf;
      const double* row = &a[(i0 - 1) * n];
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  DenseAssignment out{std::vector<std::size_t>(n), std::move(u), std::move(v)};
  for (std::size_t j = 1; j <= n; ++j) out.row_col[p[j] - 1] = j - 1;
  return out;
}

// Moves an optimal assignment to the lexicographically smallest optimal one.
// Every optimal assignment uses only edges with zero reduced cost under the
// optimal duals, so it suffices to search for alternating cycles inside that
// equality graph, fixing rows in order.
inline void lexicographic_refine(const std::vector<double>& a, std::size_t n,
                                 DenseAssignment& sol, double tol) {
  auto tight = [&](std::size_t i, std::size_t j) {
    return a[i * n + j] - sol.u[i + 1] - sol.v[j + 1] <= tol;
  };
  auto& row_col = sol.row_col;
  std::vector<std::size_t> col_row(n);
  for (std::size_t i = 0; i < n; ++i) col_row[row_col[i]] = i;
  std::vector<char> fixed(n, 0), seen(n);
  std::vector<std::size_t> from(n), queue;
  queue.reserve(n);

  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t target = row_col[r];
    for (std::size_t c = 0; c < target; ++c) {
      if (!tight(r, c)) continue;
      const std::size_t r2 = col_row[c];
      if (fixed[r2]) continue;
      // r takes c; r2 must reach r's old column through tight edges.
      std::fill(seen.begin(), seen.end(), 0);
      seen[c] = 1;
      queue.assign(1, r2);
      bool found = false;
      for (std::size_t q = 0; q < queue.size() && !found; ++q) {
        std::size_t x = queue[q];
        for (std::size_t y = 0; y < n; ++y) {
          if (seen[y] || !tight(x, y)) continue;
          seen[y] = 1;
          from[y] = x;
          if (y == target) {
            found = true;
            break;
          }
          std::size_t nx = col_row[y];
          if (!fixed[nx] && nx != r) queue.push_back(nx);
        }
      }
      if (!found) continue;
      std::size_t y = target;
      while (true) {
        std::size_t x = from[y];
        std::size_t old = row_col[x];
        row_col[x] = y;
        col_row[y] = x;
        if (x == r2) break;
        y = old;
      }
      row_col[r] = c;
      col_row[c] = r;
      break;
    }
    fixed[r] = 1;
  }
}

}  // namespace detail

inline MatchResult hungarian_min_cost(const CostMatrix& m) {
  MatchResult result;
  double max_finite = -1.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const Cost& c = m(i, j);
      if (!c) continue;
      if (!std::isfinite(*c) || *c < 0)
        throw std::invalid_argument("cost entries must be finite and nonnegative");
      max_finite = std::max(max_finite, *c);
    }
  }
  if (max_finite < 0) return result;  // no feasible pair: nothing assignable

  PaddedMatrix pad = rectangular_pad(m);
  const std::size_t n = pad.square.rows();
  // Any matching with fewer sentinel pairs is strictly cheaper than one with
  // more, so the optimum has maximum feasible cardinality.
  const double big = (max_finite + 1.0) * static_cast<double>(n);
  std::vector<double> dense(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) dense[i * n + j] = pad.square(i, j).value_or(big);

  auto sol = detail::solve_dense(dense, n);
  detail::lexicographic_refine(dense, n, sol, 1e-9 * big);

  for (std::size_t i = 0; i < pad.rows; ++i) {
    std::size_t j = sol.row_col[i];
    if (pad.is_padding(i, j) || !m(i, j)) continue;
    result.pairs.emplace_back(i, j);
    result.total_cost += *m(i, j);
  }
  return result;
}

}  // namespace coord
