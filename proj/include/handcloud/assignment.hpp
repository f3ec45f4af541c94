#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "handcloud/error.hpp"

namespace handcloud {

/// Dense row-major cost matrix.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}
  CostMatrix(std::size_t r, std::size_t c, std::vector<double> v)
      : rows(r), cols(c), values(std::move(v)) {
    if (values.size() != rows * cols) fail_data("cost matrix size does not match its shape");
  }

  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
};

/// Row i is matched to column mapping[i].
struct Assignment {
  std::vector<std::size_t> mapping;
  double total_cost = 0.0;
};

/// State carried between related solves (e.g. successive training steps on
/// one sample) to warm-start the next one.
struct AssignmentWarmStart {
  std::vector<double> column_potentials;
  std::vector<std::size_t> mapping;
};

namespace detail {

inline void check_square_finite(const CostMatrix& cost) {
  if (cost.rows != cost.cols) fail_data("assignment requires a square cost matrix");
  if (cost.values.size() != cost.rows * cost.cols) fail_data("cost matrix size does not match its shape");
  for (double v : cost.values)
    if (!std::isfinite(v)) fail_data("cost matrix has non-finite entries");
}

inline double matched_cost(const CostMatrix& cost, const std::vector<std::size_t>& mapping) {
  double total = 0.0;
  for (std::size_t i = 0; i < mapping.size(); ++i) total += cost(i, mapping[i]);
  return total;
}

}  // namespace detail

/**
 * Minimum-cost perfect matching, Jonker-Volgenant style: column reduction,
 * two rounds of augmenting row reduction, then one shortest augmenting path
 * per remaining free row with lazily updated column potentials. O(N^3)
 * worst case.
 *
 * Invariant throughout: every assigned row's column minimizes
 * cost(i, j) - v[j] over j, so all reduced costs stay non-negative.
 *
 * With `warm` holding the potentials and matching of a previous solve of the
 * same size, column reduction is skipped; previous pairs that still satisfy
 * the invariant are kept. On return `warm` holds the new state.
 */
inline Assignment solve_assignment(const CostMatrix& cost, AssignmentWarmStart* warm = nullptr) {
  detail::check_square_finite(cost);
  const std::size_t n = cost.rows;
  Assignment result;
  if (n == 0) return result;
  if (n == 1) {
    result.mapping = {0};
    result.total_cost = cost.values[0];
    return result;
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  const double* c = cost.values.data();
  auto at = [c, n](std::size_t i, std::size_t j) { return c[i * n + j]; };

  std::vector<double> v(n, 0.0);
  std::vector<std::size_t> rowsol(n, kNone), colsol(n, kNone), free_rows;
  free_rows.reserve(n);

  const bool warm_ok = warm != nullptr && warm->column_potentials.size() == n && warm->mapping.size() == n;
  if (warm_ok) {
    v = warm->column_potentials;
    for (std::size_t i = 0; i < n; ++i) {
      double m = kInf;
      std::size_t best = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const double h = at(i, j) - v[j];
        if (h < m) {
          m = h;
          best = j;
        }
      }
      std::size_t pick = warm->mapping[i];
      if (pick >= n || colsol[pick] != kNone || at(i, pick) - v[pick] > m) pick = best;
      if (colsol[pick] == kNone) {
        rowsol[i] = pick;
        colsol[pick] = i;
      } else {
        free_rows.push_back(i);
      }
    }
  } else {
    // column reduction
    std::vector<std::size_t> matches(n, 0);
    for (std::size_t jj = n; jj-- > 0;) {
      double m = at(0, jj);
      std::size_t imin = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (at(i, jj) < m) {
          m = at(i, jj);
          imin = i;
        }
      v[jj] = m;
      if (++matches[imin] == 1) {
        rowsol[imin] = jj;
        colsol[jj] = imin;
      } else if (v[jj] < v[rowsol[imin]]) {
        const std::size_t j1 = rowsol[imin];
        rowsol[imin] = jj;
        colsol[jj] = imin;
        colsol[j1] = kNone;
      } else {
        colsol[jj] = kNone;
      }
    }
    // reduction transfer
    for (std::size_t i = 0; i < n; ++i) {
      if (matches[i] == 0) {
        free_rows.push_back(i);
      } else if (matches[i] == 1) {
        const std::size_t j1 = rowsol[i];
        double m = kInf;
        for (std::size_t j = 0; j < n; ++j)
          if (j != j1) m = std::min(m, at(i, j) - v[j]);
        if (m < kInf) v[j1] -= m;
      }
    }
  }

  // augmenting row reduction; bounded, since near-ties between two rows can
  // otherwise trade a column back and forth in tiny price steps
  for (int round = 0; round < 2 && !free_rows.empty(); ++round) {
    std::vector<std::size_t> next;
    std::size_t k = 0;
    std::size_t budget = 2 * n;
    std::vector<std::size_t> queue = std::move(free_rows);
    while (k < queue.size() && budget-- > 0) {
      const std::size_t i = queue[k++];
      double umin = at(i, 0) - v[0], usubmin = kInf;
      std::size_t j1 = 0, j2 = 0;
      for (std::size_t j = 1; j < n; ++j) {
        const double h = at(i, j) - v[j];
        if (h < usubmin) {
          if (h >= umin) {
            usubmin = h;
            j2 = j;
          } else {
            usubmin = umin;
            umin = h;
            j2 = j1;
            j1 = j;
          }
        }
      }
      std::size_t i0 = colsol[j1];
      const bool strict = umin < usubmin;
      if (strict) {
        v[j1] -= usubmin - umin;
      } else if (i0 != kNone) {
        j1 = j2;
        i0 = colsol[j2];
      }
      if (i0 != kNone) rowsol[i0] = kNone;
      rowsol[i] = j1;
      colsol[j1] = i;
      if (i0 != kNone) {
        if (strict)
          queue[--k] = i0;
        else
          next.push_back(i0);
      }
    }
    next.insert(next.end(), queue.begin() + static_cast<std::ptrdiff_t>(k), queue.end());
    free_rows = std::move(next);
  }

  // shortest augmenting paths
  std::vector<double> d(n);
  std::vector<std::size_t> pred(n), collist(n);
  for (const std::size_t free_row : free_rows) {
    for (std::size_t j = 0; j < n; ++j) {
      d[j] = at(free_row, j) - v[j];
      pred[j] = free_row;
      collist[j] = j;
    }
    std::size_t low = 0, up = 0, last = 0, end_of_path = kNone;
    double m = 0.0;
    while (end_of_path == kNone) {
      if (up == low) {
        last = low;
        m = d[collist[up++]];
        for (std::size_t k = up; k < n; ++k) {
          const std::size_t j = collist[k];
          const double h = d[j];
          if (h <= m) {
            if (h < m) {
              up = low;
              m = h;
            }
            collist[k] = collist[up];
            collist[up++] = j;
          }
        }
        for (std::size_t k = low; k < up; ++k)
          if (colsol[collist[k]] == kNone) {
            end_of_path = collist[k];
            break;
          }
      }
      if (end_of_path != kNone) break;
      const std::size_t j1 = collist[low++];
      const std::size_t i = colsol[j1];
      const double h = at(i, j1) - v[j1] - m;
      for (std::size_t k = up; k < n; ++k) {
        const std::size_t j = collist[k];
        const double v2 = at(i, j) - v[j] - h;
        if (v2 < d[j]) {
          pred[j] = i;
          if (v2 == m) {
            if (colsol[j] == kNone) {
              end_of_path = j;
              break;
            }
            collist[k] = collist[up];
            collist[up++] = j;
          }
          d[j] = v2;
        }
      }
    }
    // columns finished before the final minimum get their potentials raised
    for (std::size_t k = 0; k < last; ++k) {
      const std::size_t j = collist[k];
      v[j] += d[j] - m;
    }
    std::size_t j = end_of_path;
    for (;;) {
      const std::size_t i = pred[j];
      colsol[j] = i;
      const std::size_t prev = rowsol[i];
      rowsol[i] = j;
      if (i == free_row) break;
      j = prev;
    }
  }

  result.mapping = rowsol;
  result.total_cost = detail::matched_cost(cost, result.mapping);
  if (warm != nullptr) {
    warm->column_potentials = v;
    warm->mapping = result.mapping;
  }
  return result;
}

/// Result of the approximate solver: a feasible matching plus a certified
/// upper bound on how far its cost can be above the optimum.
struct ApproximateAssignment {
  Assignment assignment;
  double lower_bound = 0.0;   ///< dual objective; optimum >= lower_bound
  double relative_gap = 0.0;  ///< (cost - lower_bound) / cost, 0 when cost is 0
};

/**
 * Epsilon-scaling auction (Gauss-Seidel, forward bidding) for large
 * instances. Phases shrink epsilon by `scale` until the duality gap of the
 * current matching falls below `target_relative_gap`.
 */
inline ApproximateAssignment solve_assignment_auction(const CostMatrix& cost,
                                                      double target_relative_gap = 1e-3,
                                                      double scale = 5.0) {
  detail::check_square_finite(cost);
  const std::size_t n = cost.rows;
  ApproximateAssignment out;
  if (n == 0) return out;

  // Maximize benefit = -cost. Prices live on columns.
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  const double max_cost = *std::max_element(cost.values.begin(), cost.values.end());
  const double min_cost = *std::min_element(cost.values.begin(), cost.values.end());
  const double range = std::max(max_cost - min_cost, 1e-300);
  std::vector<double> price(n, 0.0);
  std::vector<std::size_t> col_owner(n, kNone), row_col(n, kNone);
  double eps = range / 4.0;

  auto dual_bound = [&] {
    // min-cost dual: sum_i min_j (c_ij + p_j) - sum_j p_j, a lower bound on the optimum
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) m = std::min(m, cost(i, j) + price[j]);
      total += m;
    }
    for (std::size_t j = 0; j < n; ++j) total -= price[j];
    return total;
  };

  for (;;) {
    std::fill(col_owner.begin(), col_owner.end(), kNone);
    std::fill(row_col.begin(), row_col.end(), kNone);
    std::vector<std::size_t> unassigned(n);
    std::iota(unassigned.begin(), unassigned.end(), std::size_t{0});
    while (!unassigned.empty()) {
      const std::size_t i = unassigned.back();
      unassigned.pop_back();
      // best and second best value of -(c_ij + p_j)
      double best = -std::numeric_limits<double>::infinity();
      double second = best;
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const double value = -(cost(i, j) + price[j]);
        if (value > best) {
          second = best;
          best = value;
          best_j = j;
        } else if (value > second) {
          second = value;
        }
      }
      const double increment = (n == 1 ? 0.0 : best - second) + eps;
      price[best_j] += increment;
      const std::size_t previous = col_owner[best_j];
      col_owner[best_j] = i;
      row_col[i] = best_j;
      if (previous != kNone) {
        row_col[previous] = kNone;
        unassigned.push_back(previous);
      }
    }
    const double primal = detail::matched_cost(cost, row_col);
    const double lower = dual_bound();
    const double gap = std::max(0.0, primal - lower);
    const double rel = primal > 0.0 ? gap / primal : 0.0;
    if (rel <= target_relative_gap || eps < range * 1e-12) {
      out.assignment.mapping = row_col;
      out.assignment.total_cost = primal;
      out.lower_bound = lower;
      out.relative_gap = rel;
      return out;
    }
    eps /= scale;
  }
}

}  // namespace handcloud
