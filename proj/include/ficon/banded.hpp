#pragma once

#include <cmath>
#include <vector>

#include "ficon/common.hpp"

namespace ficon {

// Banded matrix with kl sub- and ku superdiagonals, LU factorization with
// partial pivoting (band storage grows by kl superdiagonals for fill-in).
// Row i holds columns [i-kl, i+ku].
class BandMatrix {
public:
    BandMatrix(int n, int kl, int ku)
        : n_(n), kl_(kl), ku_(ku), w_(2 * kl + ku + 1),
          ab_(size_t(n) * w_, 0.0), piv_(n, 0) {}

    int size() const { return n_; }

    double& at(int i, int j) { return ab_[size_t(i) * w_ + (j - i + kl_)]; }
    double at(int i, int j) const { return ab_[size_t(i) * w_ + (j - i + kl_)]; }
    bool in_band(int i, int j) const {
        return j >= std::max(0, i - kl_) && j <= std::min(n_ - 1, i + ku_ + kl_);
    }

    // Row sums for diagonal dominance: |a_ii| - sum_{j != i} |a_ij| (call
    // before factor()).
    double dominance_margin() const {
        double margin = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n_; ++i) {
            double off = 0.0;
            for (int j = std::max(0, i - kl_); j <= std::min(n_ - 1, i + ku_); ++j)
                if (j != i) off += std::abs(at(i, j));
            margin = std::min(margin, std::abs(at(i, i)) - off);
        }
        return margin;
    }

    void factor() {
        min_pivot_ = std::numeric_limits<double>::infinity();
        max_pivot_ = 0.0;
        for (int k = 0; k < n_; ++k) {
            int pmax = std::min(n_ - 1, k + kl_);
            int ip = k;
            double vmax = std::abs(get(k, k));
            for (int i = k + 1; i <= pmax; ++i) {
                double v = std::abs(get(i, k));
                if (v > vmax) {
                    vmax = v;
                    ip = i;
                }
            }
            piv_[k] = ip;
            if (vmax == 0.0 || !std::isfinite(vmax))
                throw SolverError("banded solve: singular step matrix (zero pivot at row " +
                                  std::to_string(k) + ", pivot ratio " +
                                  std::to_string(pivot_ratio()) + ")");
            if (ip != k) swap_rows(k, ip, k, std::min(n_ - 1, k + ku_ + kl_));
            double piv = get(k, k);
            min_pivot_ = std::min(min_pivot_, std::abs(piv));
            max_pivot_ = std::max(max_pivot_, std::abs(piv));
            for (int i = k + 1; i <= pmax; ++i) {
                double m = get(i, k) / piv;
                set(i, k, m);
                int jmax = std::min(n_ - 1, k + ku_ + kl_);
                for (int j = k + 1; j <= jmax; ++j)
                    set(i, j, get(i, j) - m * get(k, j));
            }
        }
        factored_ = true;
    }

    void solve(std::vector<double>& b) const {
        if (!factored_) throw SolverError("banded solve: factor() not called");
        for (int k = 0; k < n_; ++k) {
            if (piv_[k] != k) std::swap(b[k], b[piv_[k]]);
            int imax = std::min(n_ - 1, k + kl_);
            for (int i = k + 1; i <= imax; ++i) b[i] -= get(i, k) * b[k];
        }
        for (int k = n_ - 1; k >= 0; --k) {
            int jmax = std::min(n_ - 1, k + ku_ + kl_);
            for (int j = k + 1; j <= jmax; ++j) b[k] -= get(k, j) * b[j];
            b[k] /= get(k, k);
        }
    }

    // Crude conditioning indicator.
    double pivot_ratio() const {
        return max_pivot_ > 0.0 ? min_pivot_ / max_pivot_ : 0.0;
    }

private:
    double get(int i, int j) const { return ab_[size_t(i) * w_ + (j - i + kl_)]; }
    void set(int i, int j, double v) { ab_[size_t(i) * w_ + (j - i + kl_)] = v; }
    void swap_rows(int r1, int r2, int jlo, int jhi) {
        for (int j = jlo; j <= jhi; ++j) {
            double tmp = get(r1, j);
            set(r1, j, get(r2, j));
            set(r2, j, tmp);
        }
    }

    int n_, kl_, ku_, w_;
    std::vector<double> ab_;
    std::vector<int> piv_;
    bool factored_ = false;
    double min_pivot_ = 0.0, max_pivot_ = 0.0;
};

}  // namespace ficon
