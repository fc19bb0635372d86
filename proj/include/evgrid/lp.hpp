#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "evgrid/errors.hpp"

namespace evgrid::lp {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { LessEq, GreaterEq, Equal };
enum class Status { Optimal, Infeasible, Unbounded };

struct Row {
    std::vector<std::pair<int, double>> coeffs;  // (variable index, coefficient)
    Sense sense = Sense::LessEq;
    double rhs = 0.0;
};

// minimize cost'x  subject to  rows, lower <= x <= upper
struct Problem {
    int num_vars = 0;
    std::vector<double> cost;
    std::vector<double> lower;  // -inf allowed
    std::vector<double> upper;  // +inf allowed
    std::vector<Row> rows;

    int add_var(double lo, double hi, double c) {
        lower.push_back(lo);
        upper.push_back(hi);
        cost.push_back(c);
        return num_vars++;
    }

    void add_row(Sense s, double rhs, std::vector<std::pair<int, double>> coeffs) {
        rows.push_back(Row{std::move(coeffs), s, rhs});
    }
};

struct Solution {
    Status status = Status::Optimal;
    double objective = 0.0;
    std::vector<double> x;         // structural variable values
    std::vector<double> row_dual;  // shadow price d(objective)/d(rhs) per row
    std::vector<double> reduced_cost;
    int iterations = 0;
};

// Two-phase primal simplex on the full tableau with explicit variable bounds.
// Rows become equalities via one slack each (<= : s in [0,inf), >= : s in
// (-inf,0], = : s fixed at 0); rows the slack basis cannot satisfy get
// unit-cost artificials in phase 1. Dantzig pricing with a Bland fallback
// after a degenerate stall; a bounded pivot count guards against cycling.
class Simplex {
  public:
    explicit Simplex(const Problem& p) : p_(p) { build(); }

    Solution solve() {
        Solution sol;
        if (need_phase1_) {
            set_costs(/*phase1=*/true);
            if (!run()) throw NumericalError("simplex: phase 1 reported unbounded");
            if (objective_value() > 1e-7) {
                sol.status = Status::Infeasible;
                sol.iterations = iterations_;
                return sol;
            }
            pivot_out_artificials();
            lock_artificials();
        }
        set_costs(/*phase1=*/false);
        const bool bounded = run();
        sol.status = bounded ? Status::Optimal : Status::Unbounded;
        sol.iterations = iterations_;
        if (!bounded) return sol;

        sol.x.assign(p_.num_vars, 0.0);
        for (int j = 0; j < p_.num_vars; ++j) sol.x[j] = value_of(j);
        const auto y = duals();
        sol.row_dual = y;
        sol.reduced_cost.assign(p_.num_vars, 0.0);
        for (int j = 0; j < p_.num_vars; ++j) {
            double r = cost_[j];
            for (int i = 0; i < m_; ++i)
                if (orig_[i][j] != 0.0) r -= y[i] * orig_[i][j];
            sol.reduced_cost[j] = r;
        }
        for (int j = 0; j < p_.num_vars; ++j) sol.objective += p_.cost[j] * sol.x[j];
        return sol;
    }

  private:
    enum class VarStatus : unsigned char { Basic, AtLower, AtUpper, FreeZero };

    const Problem& p_;
    int m_ = 0;      // rows
    int ncols_ = 0;  // structural + slack + artificial columns
    int nstruct_ = 0;
    int nart_ = 0;
    bool need_phase1_ = false;
    std::vector<std::vector<double>> orig_;  // equality-form constraint matrix
    std::vector<std::vector<double>> tab_;   // B^-1 * orig
    std::vector<double> rhs_;                // original right-hand sides
    std::vector<double> rhsb_;               // B^-1 * rhs
    std::vector<double> lo_, hi_, cost_;
    std::vector<int> basis_;       // column basic in each row
    std::vector<VarStatus> stat_;  // per column
    std::vector<double> xb_;       // value of the basic variable of each row
    std::vector<double> zrow_;     // reduced costs per column
    int iterations_ = 0;
    int degenerate_streak_ = 0;

    int slack_col(int row) const { return nstruct_ + row; }
    int art0() const { return nstruct_ + m_; }

    void build() {
        m_ = static_cast<int>(p_.rows.size());
        nstruct_ = p_.num_vars;
        if (static_cast<int>(p_.cost.size()) != nstruct_ || static_cast<int>(p_.lower.size()) != nstruct_ ||
            static_cast<int>(p_.upper.size()) != nstruct_)
            throw InputError("LP vector sizes inconsistent with num_vars");

        ncols_ = nstruct_ + m_;
        orig_.assign(m_, std::vector<double>(ncols_, 0.0));
        rhs_.assign(m_, 0.0);
        lo_.assign(ncols_, 0.0);
        hi_.assign(ncols_, 0.0);
        for (int j = 0; j < nstruct_; ++j) {
            lo_[j] = p_.lower[j];
            hi_[j] = p_.upper[j];
            if (lo_[j] > hi_[j]) throw InputError("LP variable with lower > upper");
        }
        for (int i = 0; i < m_; ++i) {
            const auto& row = p_.rows[i];
            for (auto [j, c] : row.coeffs) {
                if (j < 0 || j >= nstruct_) throw InputError("LP row references variable out of range");
                orig_[i][j] += c;
            }
            rhs_[i] = row.rhs;
            const int s = slack_col(i);
            orig_[i][s] = 1.0;
            switch (row.sense) {
                case Sense::LessEq: lo_[s] = 0.0, hi_[s] = kInf; break;
                case Sense::GreaterEq: lo_[s] = -kInf, hi_[s] = 0.0; break;
                case Sense::Equal: lo_[s] = 0.0, hi_[s] = 0.0; break;
            }
        }

        // nonbasic variables start at the finite bound nearest zero
        stat_.assign(ncols_, VarStatus::AtLower);
        for (int j = 0; j < ncols_; ++j) {
            if (lo_[j] == -kInf && hi_[j] == kInf)
                stat_[j] = VarStatus::FreeZero;
            else if (lo_[j] == -kInf)
                stat_[j] = VarStatus::AtUpper;
            else if (hi_[j] == kInf)
                stat_[j] = VarStatus::AtLower;
            else
                stat_[j] = std::fabs(lo_[j]) <= std::fabs(hi_[j]) ? VarStatus::AtLower : VarStatus::AtUpper;
        }

        // residual each row's slack would have to carry at the start point
        std::vector<double> resid = rhs_;
        for (int j = 0; j < nstruct_; ++j) {
            const double v = (stat_[j] == VarStatus::AtLower) ? lo_[j]
                             : (stat_[j] == VarStatus::AtUpper) ? hi_[j]
                                                                : 0.0;
            if (v == 0.0) continue;
            for (int i = 0; i < m_; ++i)
                if (orig_[i][j] != 0.0) resid[i] -= orig_[i][j] * v;
        }
        std::vector<int> art_rows;
        for (int i = 0; i < m_; ++i) {
            const int s = slack_col(i);
            if (resid[i] < lo_[s] - 1e-11 || resid[i] > hi_[s] + 1e-11) art_rows.push_back(i);
        }
        nart_ = static_cast<int>(art_rows.size());
        need_phase1_ = nart_ > 0;

        std::vector<double> row_sign(m_, 1.0);  // sign of the basic column in each row
        basis_.resize(m_);
        for (int i = 0; i < m_; ++i) {
            basis_[i] = slack_col(i);
            stat_[basis_[i]] = VarStatus::Basic;
        }
        if (need_phase1_) {
            const int base = ncols_;
            ncols_ += nart_;
            lo_.resize(ncols_, 0.0);
            hi_.resize(ncols_, kInf);
            stat_.resize(ncols_, VarStatus::AtLower);
            for (auto& row : orig_) row.resize(ncols_, 0.0);
            for (int k = 0; k < nart_; ++k) {
                const int i = art_rows[k];
                const int s = slack_col(i);
                const int a = base + k;
                const double sv = std::clamp(resid[i], lo_[s], hi_[s]);
                stat_[s] = (sv == lo_[s]) ? VarStatus::AtLower : VarStatus::AtUpper;
                const double leftover = resid[i] - sv;
                orig_[i][a] = leftover >= 0.0 ? 1.0 : -1.0;
                row_sign[i] = orig_[i][a];
                basis_[i] = a;
                stat_[a] = VarStatus::Basic;
            }
        }

        // initial B is diagonal with entries row_sign, so B^-1 scales rows
        tab_ = orig_;
        rhsb_ = rhs_;
        for (int i = 0; i < m_; ++i) {
            if (row_sign[i] < 0.0) {
                for (double& v : tab_[i]) v = -v;
                rhsb_[i] = -rhsb_[i];
            }
        }
        xb_.assign(m_, 0.0);
        recompute_basics();
        cost_.assign(ncols_, 0.0);
        zrow_.assign(ncols_, 0.0);
    }

    double nonbasic_value(int j) const {
        switch (stat_[j]) {
            case VarStatus::AtLower: return lo_[j];
            case VarStatus::AtUpper: return hi_[j];
            default: return 0.0;
        }
    }

    double value_of(int j) const {
        if (stat_[j] == VarStatus::Basic) {
            for (int i = 0; i < m_; ++i)
                if (basis_[i] == j) return xb_[i];
        }
        return nonbasic_value(j);
    }

    // xb = B^-1 b - sum over nonbasic columns of (B^-1 A_j) x_j
    void recompute_basics() {
        std::vector<double> acc(m_, 0.0);
        for (int j = 0; j < ncols_; ++j) {
            if (stat_[j] == VarStatus::Basic) continue;
            const double v = nonbasic_value(j);
            if (v == 0.0) continue;
            for (int i = 0; i < m_; ++i)
                if (tab_[i][j] != 0.0) acc[i] += tab_[i][j] * v;
        }
        for (int i = 0; i < m_; ++i) xb_[i] = rhsb_[i] - acc[i];
    }

    void set_costs(bool phase1) {
        std::fill(cost_.begin(), cost_.end(), 0.0);
        if (phase1) {
            for (int a = art0(); a < ncols_; ++a) cost_[a] = 1.0;
        } else {
            for (int j = 0; j < nstruct_; ++j) cost_[j] = p_.cost[j];
        }
        refresh_zrow();
    }

    void lock_artificials() {
        for (int a = art0(); a < ncols_; ++a) {
            lo_[a] = 0.0;
            hi_[a] = 0.0;
            if (stat_[a] != VarStatus::Basic) stat_[a] = VarStatus::AtLower;
        }
    }

    // Degenerate pivots moving any artificial still basic at zero out of the
    // basis; all-zero rows (redundant constraints) keep theirs, locked.
    void pivot_out_artificials() {
        for (int r = 0; r < m_; ++r) {
            if (basis_[r] < art0()) continue;
            int q = -1;
            for (int j = 0; j < art0(); ++j) {
                if (stat_[j] == VarStatus::Basic) continue;
                if (lo_[j] == hi_[j]) continue;
                if (std::fabs(tab_[r][j]) > 1e-9) {
                    q = j;
                    break;
                }
            }
            if (q >= 0) pivot(r, q, +1, 0.0, false);
        }
    }

    // y = c_B' B^-1, read off the slack columns of the tableau.
    std::vector<double> duals() const {
        std::vector<double> y(m_, 0.0);
        for (int i = 0; i < m_; ++i) {
            double v = 0.0;
            for (int k = 0; k < m_; ++k) {
                const double cb = cost_[basis_[k]];
                if (cb != 0.0) v += cb * tab_[k][slack_col(i)];
            }
            y[i] = v;
        }
        return y;
    }

    void refresh_zrow() {
        const auto y = duals();
        for (int j = 0; j < ncols_; ++j) {
            double r = cost_[j];
            for (int i = 0; i < m_; ++i)
                if (orig_[i][j] != 0.0) r -= y[i] * orig_[i][j];
            zrow_[j] = r;
        }
        for (int i = 0; i < m_; ++i) zrow_[basis_[i]] = 0.0;
    }

    double objective_value() const {
        double obj = 0.0;
        for (int i = 0; i < m_; ++i) obj += cost_[basis_[i]] * xb_[i];
        for (int j = 0; j < ncols_; ++j)
            if (stat_[j] != VarStatus::Basic && cost_[j] != 0.0) obj += cost_[j] * nonbasic_value(j);
        return obj;
    }

    int entering_dir(int j, double tol) const {
        if (stat_[j] == VarStatus::Basic) return 0;
        if (lo_[j] == hi_[j]) return 0;  // fixed variable
        switch (stat_[j]) {
            case VarStatus::AtLower: return zrow_[j] < -tol ? +1 : 0;
            case VarStatus::AtUpper: return zrow_[j] > tol ? -1 : 0;
            case VarStatus::FreeZero:
                if (zrow_[j] < -tol) return +1;
                if (zrow_[j] > tol) return -1;
                return 0;
            default: return 0;
        }
    }

    // One simplex phase. Returns false when an improving ray is unbounded.
    bool run() {
        const double ztol = 1e-9;
        const int pivot_cap = 5000 + 200 * (m_ + ncols_);
        for (;;) {
            if (iterations_ > pivot_cap)
                throw NumericalError("simplex pivot cap exceeded (" + std::to_string(pivot_cap) + ")");
            const bool bland = degenerate_streak_ > 40;

            int q = -1, dir = 0;
            if (bland) {
                for (int j = 0; j < ncols_ && q < 0; ++j) {
                    const int d = entering_dir(j, ztol);
                    if (d != 0) q = j, dir = d;
                }
            } else {
                double best = ztol;
                for (int j = 0; j < ncols_; ++j) {
                    const int d = entering_dir(j, ztol);
                    if (d != 0 && std::fabs(zrow_[j]) > best) {
                        best = std::fabs(zrow_[j]);
                        q = j;
                        dir = d;
                    }
                }
            }
            if (q < 0) return true;

            // ratio test: entering moves by dir * t, t >= 0
            double tmax = kInf;
            int leave_row = -1;
            bool leave_to_upper = false;
            if (lo_[q] > -kInf && hi_[q] < kInf) tmax = hi_[q] - lo_[q];  // bound flip distance
            for (int i = 0; i < m_; ++i) {
                const double a = dir * tab_[i][q];
                if (std::fabs(a) < 1e-11) continue;
                const int bj = basis_[i];
                double t;
                bool to_upper;
                if (a > 0.0) {  // basic variable decreases toward its lower bound
                    if (lo_[bj] == -kInf) continue;
                    t = (xb_[i] - lo_[bj]) / a;
                    to_upper = false;
                } else {  // basic variable increases toward its upper bound
                    if (hi_[bj] == kInf) continue;
                    t = (xb_[i] - hi_[bj]) / a;
                    to_upper = true;
                }
                if (t < 0.0) t = 0.0;
                bool take = t < tmax - 1e-12;
                if (!take && bland && t < tmax + 1e-12 && leave_row >= 0 && basis_[i] < basis_[leave_row])
                    take = true;
                if (take) {
                    tmax = t;
                    leave_row = i;
                    leave_to_upper = to_upper;
                }
            }
            if (tmax == kInf) return false;

            ++iterations_;
            degenerate_streak_ = (tmax < 1e-11) ? degenerate_streak_ + 1 : 0;

            if (leave_row < 0) {
                // entering variable flips to its opposite bound, basis unchanged
                for (int i = 0; i < m_; ++i) xb_[i] -= dir * tmax * tab_[i][q];
                stat_[q] = (dir > 0) ? VarStatus::AtUpper : VarStatus::AtLower;
                continue;
            }
            pivot(leave_row, q, dir, tmax, leave_to_upper);
        }
    }

    void pivot(int r, int q, int dir, double t, bool leaving_to_upper) {
        const int leaving = basis_[r];
        const double piv = tab_[r][q];
        if (std::fabs(piv) < 1e-11) throw NumericalError("simplex: vanishing pivot element");

        const double enter_val = nonbasic_value(q) + dir * t;
        for (int i = 0; i < m_; ++i)
            if (i != r) xb_[i] -= dir * t * tab_[i][q];

        const double inv = 1.0 / piv;
        for (double& v : tab_[r]) v *= inv;
        rhsb_[r] *= inv;
        for (int i = 0; i < m_; ++i) {
            if (i == r) continue;
            const double f = tab_[i][q];
            if (f == 0.0) continue;
            for (int j = 0; j < ncols_; ++j) tab_[i][j] -= f * tab_[r][j];
            rhsb_[i] -= f * rhsb_[r];
        }

        const double zq = zrow_[q];
        if (zq != 0.0)
            for (int j = 0; j < ncols_; ++j) zrow_[j] -= zq * tab_[r][j];

        basis_[r] = q;
        stat_[q] = VarStatus::Basic;
        stat_[leaving] = leaving_to_upper ? VarStatus::AtUpper : VarStatus::AtLower;
        xb_[r] = enter_val;
        zrow_[q] = 0.0;

        if (iterations_ % 64 == 0) {
            refresh_zrow();
            recompute_basics();
        }
    }
};

inline Solution solve(const Problem& p) {
    Simplex s(p);
    return s.solve();
}

}  // namespace evgrid::lp
