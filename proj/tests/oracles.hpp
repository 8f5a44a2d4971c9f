// Test-side reference implementations. None of these call into the code
// they are used to check.
#pragma once

#include <unistd.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace oracle {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("pedattr-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct PairTerm {
  std::size_t u, v;
  double w;
};

/// Minimum of sum_i cost[i][l_i] + sum_e w_e [l_u != l_v] by enumeration.
/// Returns the minimum energy.
inline double min_energy(const std::vector<std::array<double, 2>>& cost,
                         const std::vector<PairTerm>& pairs) {
  const std::size_t n = cost.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << n); ++code) {
    double e = 0;
    for (std::size_t i = 0; i < n; ++i) e += cost[i][(code >> i) & 1U];
    for (const auto& p : pairs) {
      if (((code >> p.u) & 1U) != ((code >> p.v) & 1U)) e += p.w;
    }
    best = std::min(best, e);
  }
  return best;
}

inline double labeling_energy(const std::vector<std::array<double, 2>>& cost,
                              const std::vector<PairTerm>& pairs,
                              const std::vector<std::uint8_t>& labels) {
  double e = 0;
  for (std::size_t i = 0; i < cost.size(); ++i) e += cost[i][labels[i]];
  for (const auto& p : pairs) {
    if (labels[p.u] != labels[p.v]) e += p.w;
  }
  return e;
}

/// Edmonds-Karp on a dense capacity matrix; node 0 = source, 1 = sink.
inline std::int64_t edmonds_karp(std::vector<std::vector<std::int64_t>> cap) {
  const std::size_t n = cap.size();
  std::int64_t flow = 0;
  while (true) {
    std::vector<int> parent(n, -1);
    parent[0] = 0;
    std::deque<std::size_t> q{0};
    while (!q.empty() && parent[1] < 0) {
      const std::size_t u = q.front();
      q.pop_front();
      for (std::size_t v = 0; v < n; ++v) {
        if (parent[v] < 0 && cap[u][v] > 0) {
          parent[v] = static_cast<int>(u);
          q.push_back(v);
        }
      }
    }
    if (parent[1] < 0) return flow;
    std::int64_t b = std::numeric_limits<std::int64_t>::max();
    for (std::size_t v = 1; v != 0; v = static_cast<std::size_t>(parent[v])) {
      b = std::min(b, cap[static_cast<std::size_t>(parent[v])][v]);
    }
    for (std::size_t v = 1; v != 0; v = static_cast<std::size_t>(parent[v])) {
      const auto u = static_cast<std::size_t>(parent[v]);
      cap[u][v] -= b;
      cap[v][u] += b;
    }
    flow += b;
  }
}

/// Solves A x = b by Gaussian elimination with partial pivoting. Returns
/// false when A is (numerically) singular.
inline bool solve_linear(std::vector<std::vector<double>> A, std::vector<double> b,
                         std::vector<double>& x) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    }
    if (std::abs(A[piv][c]) < 1e-12) return false;
    std::swap(A[c], A[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = A[r][c] / A[c][c];
      for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
      b[r] -= f * b[c];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t k = r + 1; k < n; ++k) s -= A[r][k] * x[k];
    x[r] = s / A[r][r];
  }
  return true;
}

/// Exact SVM dual by active-set enumeration: every split of the points into
/// alpha = 0, alpha = C and free is tried, the free block solved from the
/// KKT system, and the best feasible KKT point kept.
///   min 1/2 a'Qa - 1'a,  Q_ij = y_i y_j K_ij,  0 <= a <= C,  y'a = 0
inline std::vector<double> svm_dual_qp(const std::vector<std::vector<double>>& K,
                                       const std::vector<int>& y, double C) {
  const std::size_t n = y.size();
  auto Q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * K[i][j]; };
  auto objective = [&](const std::vector<double>& a) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) s += 0.5 * a[i] * a[j] * Q(i, j);
      s -= a[i];
    }
    return s;
  };
  const double tol = 1e-9;
  std::vector<double> best;
  double best_obj = std::numeric_limits<double>::infinity();
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= 3;
  for (std::size_t code = 0; code < combos; ++code) {
    std::vector<int> state(n);  // 0 lower, 1 upper, 2 free
    std::size_t c = code;
    for (std::size_t i = 0; i < n; ++i, c /= 3) state[i] = static_cast<int>(c % 3);
    std::vector<std::size_t> F;
    std::vector<double> a(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (state[i] == 1) a[i] = C;
      if (state[i] == 2) F.push_back(i);
    }
    double b = 0;
    if (!F.empty()) {
      const std::size_t m = F.size();
      std::vector<std::vector<double>> A(m + 1, std::vector<double>(m + 1, 0.0));
      std::vector<double> rhs(m + 1, 0.0);
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t k = 0; k < m; ++k) A[r][k] = Q(F[r], F[k]);
        A[r][m] = y[F[r]];
        A[m][r] = y[F[r]];
        rhs[r] = 1.0;
        for (std::size_t j = 0; j < n; ++j) {
          if (state[j] == 1) rhs[r] -= Q(F[r], j) * C;
        }
      }
      for (std::size_t j = 0; j < n; ++j) {
        if (state[j] == 1) rhs[m] -= y[j] * C;
      }
      std::vector<double> x;
      if (!solve_linear(A, rhs, x)) continue;
      bool ok = true;
      for (std::size_t r = 0; r < m; ++r) {
        if (x[r] < -tol || x[r] > C + tol) ok = false;
        a[F[r]] = std::clamp(x[r], 0.0, C);
      }
      if (!ok) continue;
      b = x[m];
    } else {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) s += y[i] * a[i];
      if (std::abs(s) > tol) continue;
      // any b inside the interval allowed by the bound constraints
      double lo = -std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t i = 0; i < n; ++i) {
        double g = -1;
        for (std::size_t j = 0; j < n; ++j) g += Q(i, j) * a[j];
        // gradient with multiplier: g + b y_i; >= 0 at lower, <= 0 at upper
        const bool need_ge = state[i] == 0;
        const double bound = -g / y[i];
        if ((y[i] > 0) == need_ge) lo = std::max(lo, bound);
        else hi = std::min(hi, bound);
      }
      if (lo > hi + tol) continue;
      b = std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0);
    }
    bool kkt = true;
    for (std::size_t i = 0; i < n && kkt; ++i) {
      double g = -1 + b * y[i];
      for (std::size_t j = 0; j < n; ++j) g += Q(i, j) * a[j];
      if (state[i] == 0 && g < -1e-7) kkt = false;
      if (state[i] == 1 && g > 1e-7) kkt = false;
    }
    if (!kkt) continue;
    const double obj = objective(a);
    if (obj < best_obj - 1e-12) {
      best_obj = obj;
      best = a;
    }
  }
  return best;
}

}  // namespace oracle
