#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "caty/common.hpp"

namespace caty {

// Dense column-free helpers for the small (d <= a few dozen) systems that
// show up in least-squares transition estimation. Matrices are row-major
// std::vector<double> of size n*n.

// Cholesky factor of a symmetric positive definite matrix.
class Cholesky {
  public:
    Cholesky(const std::vector<double>& a, int n) : n_(n), l_(a) {
        for (int j = 0; j < n_; ++j) {
            double d = l_[j * n_ + j];
            for (int k = 0; k < j; ++k) d -= l_[j * n_ + k] * l_[j * n_ + k];
            if (d <= 0.0) throw ValidationError("Cholesky: matrix not positive definite");
            double lj = std::sqrt(d);
            l_[j * n_ + j] = lj;
            for (int i = j + 1; i < n_; ++i) {
                double s = l_[i * n_ + j];
                for (int k = 0; k < j; ++k) s -= l_[i * n_ + k] * l_[j * n_ + k];
                l_[i * n_ + j] = s / lj;
            }
        }
    }

    // Solves A x = b in place.
    void solve(std::vector<double>& b) const {
        for (int i = 0; i < n_; ++i) {
            double s = b[i];
            for (int k = 0; k < i; ++k) s -= l_[i * n_ + k] * b[k];
            b[i] = s / l_[i * n_ + i];
        }
        for (int i = n_ - 1; i >= 0; --i) {
            double s = b[i];
            for (int k = i + 1; k < n_; ++k) s -= l_[k * n_ + i] * b[k];
            b[i] = s / l_[i * n_ + i];
        }
    }

    // Quadratic form x' A^{-1} x.
    [[nodiscard]] double inv_quad(const std::vector<double>& x) const {
        std::vector<double> y = x;
        for (int i = 0; i < n_; ++i) {
            double s = y[i];
            for (int k = 0; k < i; ++k) s -= l_[i * n_ + k] * y[k];
            y[i] = s / l_[i * n_ + i];
        }
        double q = 0.0;
        for (int i = 0; i < n_; ++i) q += y[i] * y[i];
        return q;
    }

  private:
    int n_;
    std::vector<double> l_;
};

struct LpResult {
    bool bounded = true;
    double objective = 0.0;
    std::vector<double> x;
};

// Primal simplex for  max c'x  s.t.  A x <= b, x >= 0  with b >= 0, so the
// slack basis is feasible from the start. Bland's rule, dense tableau; sized
// for the separating-hyperplane certificates, not for large programs.
inline LpResult simplex_max(const std::vector<double>& c, const std::vector<std::vector<double>>& a,
                            const std::vector<double>& b) {
    const int m = static_cast<int>(a.size());
    const int n = static_cast<int>(c.size());
    const int cols = n + m + 1;
    std::vector<std::vector<double>> t(m + 1, std::vector<double>(cols, 0.0));
    std::vector<int> basis(m);
    for (int i = 0; i < m; ++i) {
        if (b[i] < 0.0) throw ValidationError("simplex_max requires b >= 0");
        for (int j = 0; j < n; ++j) t[i][j] = a[i][j];
        t[i][n + i] = 1.0;
        t[i][cols - 1] = b[i];
        basis[i] = n + i;
    }
    for (int j = 0; j < n; ++j) t[m][j] = -c[j];

    const double eps = 1e-11;
    const long max_iters = 200L * (m + n + 10);
    for (long iter = 0; iter < max_iters; ++iter) {
        int pivot_col = -1;
        for (int j = 0; j < cols - 1; ++j) {
            if (t[m][j] < -eps) { pivot_col = j; break; }  // Bland: lowest index
        }
        if (pivot_col < 0) break;  // optimal

        int pivot_row = -1;
        double best_ratio = 0.0;
        for (int i = 0; i < m; ++i) {
            if (t[i][pivot_col] > eps) {
                double ratio = t[i][cols - 1] / t[i][pivot_col];
                if (pivot_row < 0 || ratio < best_ratio - eps ||
                    (ratio < best_ratio + eps && basis[i] < basis[pivot_row])) {
                    pivot_row = i;
                    best_ratio = ratio;
                }
            }
        }
        if (pivot_row < 0) {
            LpResult r;
            r.bounded = false;
            return r;  // unbounded direction
        }

        double pv = t[pivot_row][pivot_col];
        for (int j = 0; j < cols; ++j) t[pivot_row][j] /= pv;
        for (int i = 0; i <= m; ++i) {
            if (i == pivot_row) continue;
            double f = t[i][pivot_col];
            if (f == 0.0) continue;
            for (int j = 0; j < cols; ++j) t[i][j] -= f * t[pivot_row][j];
        }
        basis[pivot_row] = pivot_col;
    }

    LpResult r;
    r.x.assign(n, 0.0);
    for (int i = 0; i < m; ++i)
        if (basis[i] < n) r.x[basis[i]] = t[i][cols - 1];
    r.objective = 0.0;
    for (int j = 0; j < n; ++j) r.objective += c[j] * r.x[j];
    return r;
}

}  // namespace caty
