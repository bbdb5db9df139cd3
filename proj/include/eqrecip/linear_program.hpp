#pragma once

// Small dense linear programs: a problem container, a two-phase simplex with
// Bland's anti-cycling rule, and a plain-text dump for inspection. Sized for
// instances with a handful of variables; not a general-purpose solver.

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace eqr {

template <typename Scalar>
struct LinearProgram {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    std::vector<std::string> names;
    Vector objective;                 ///< minimize objective.dot(x) + objective_constant
    Scalar objective_constant = Scalar(0);
    Matrix eq_lhs;                    ///< eq_lhs * x == eq_rhs
    Vector eq_rhs;
    Matrix ub_lhs;                    ///< ub_lhs * x <= ub_rhs
    Vector ub_rhs;
    Vector lower;
    Vector upper;                     ///< may hold +infinity

    explicit LinearProgram(int n = 0)
        : names(static_cast<std::size_t>(n)),
          objective(Vector::Zero(n)),
          eq_lhs(0, n),
          eq_rhs(0),
          ub_lhs(0, n),
          ub_rhs(0),
          lower(Vector::Zero(n)),
          upper(Vector::Constant(n, std::numeric_limits<Scalar>::infinity()))
    {
    }

    int variables() const { return static_cast<int>(objective.size()); }

    template <typename Derived>
    void add_equality(const Eigen::MatrixBase<Derived>& row, Scalar rhs)
    {
        append(eq_lhs, eq_rhs, row, rhs);
    }

    template <typename Derived>
    void add_inequality(const Eigen::MatrixBase<Derived>& row, Scalar rhs)
    {
        append(ub_lhs, ub_rhs, row, rhs);
    }

    Scalar evaluate(const Vector& x) const { return objective.dot(x) + objective_constant; }

    /// Largest violation of any constraint or bound at x.
    Scalar max_violation(const Vector& x) const
    {
        Scalar v(0);
        if (eq_lhs.rows() > 0) {
            v = std::max(v, (eq_lhs * x - eq_rhs).cwiseAbs().maxCoeff());
        }
        if (ub_lhs.rows() > 0) {
            v = std::max(v, (ub_lhs * x - ub_rhs).maxCoeff());
        }
        v = std::max(v, (lower - x).maxCoeff());
        v = std::max(v, (x - upper).maxCoeff());
        return v;
    }

    void validate() const
    {
        const int n = variables();
        if (static_cast<int>(names.size()) != n || eq_lhs.cols() != n || ub_lhs.cols() != n ||
            eq_lhs.rows() != eq_rhs.size() || ub_lhs.rows() != ub_rhs.size() ||
            lower.size() != n || upper.size() != n) {
            throw std::invalid_argument("linear program dimensions are inconsistent");
        }
        if (!objective.allFinite() || !std::isfinite(objective_constant) || !eq_lhs.allFinite() ||
            !eq_rhs.allFinite() || !ub_lhs.allFinite() || !ub_rhs.allFinite() ||
            !lower.allFinite()) {
            throw std::invalid_argument("linear program has non-finite coefficients");
        }
        if ((lower.array() > upper.array()).any()) {
            throw std::invalid_argument("linear program has an empty variable box");
        }
    }

private:
    template <typename Derived>
    void append(Matrix& lhs, Vector& rhs, const Eigen::MatrixBase<Derived>& row, Scalar value)
    {
        if (row.size() != variables()) {
            throw std::invalid_argument("constraint row has the wrong length");
        }
        lhs.conservativeResize(lhs.rows() + 1, Eigen::NoChange);
        lhs.row(lhs.rows() - 1) = row.transpose();
        rhs.conservativeResize(rhs.size() + 1);
        rhs(rhs.size() - 1) = value;
    }
};

enum class LpStatus { optimal, infeasible, unbounded };

inline const char* to_string(LpStatus s)
{
    switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    }
    return "?";
}

template <typename Scalar>
struct LpSolution {
    typename LinearProgram<Scalar>::Vector x;
    Scalar value = std::numeric_limits<Scalar>::quiet_NaN();
    LpStatus status = LpStatus::infeasible;
};

namespace detail {

template <typename Scalar>
class Tableau {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Tableau(Matrix a, std::vector<int> basis, Scalar tol)
        : t_(std::move(a)), basis_(std::move(basis)), tol_(tol)
    {
    }

    int rows() const { return static_cast<int>(t_.rows()); }
    int columns() const { return static_cast<int>(t_.cols()) - 1; }
    Scalar rhs(int i) const { return t_(i, columns()); }
    Scalar at(int i, int j) const { return t_(i, j); }
    const std::vector<int>& basis() const { return basis_; }

    /// Runs simplex on `cost`; columns >= allowed_cols never enter. Returns false if unbounded.
    bool minimize(const Vector& cost, int allowed_cols)
    {
        Vector reduced = cost;
        for (int i = 0; i < rows(); ++i) {
            reduced -= cost(basis_[i]) * t_.row(i).head(columns()).transpose();
        }
        for (;;) {
            int enter = -1;
            for (int j = 0; j < allowed_cols; ++j) {
                if (reduced(j) < -tol_) {
                    enter = j;  // Bland: lowest eligible index
                    break;
                }
            }
            if (enter < 0) {
                return true;
            }
            int leave = -1;
            Scalar best = std::numeric_limits<Scalar>::infinity();
            for (int i = 0; i < rows(); ++i) {
                if (t_(i, enter) > tol_) {
                    const Scalar ratio = rhs(i) / t_(i, enter);
                    if (ratio < best - tol_ ||
                        (std::abs(ratio - best) <= tol_ && basis_[i] < basis_[leave])) {
                        best = ratio;
                        leave = i;
                    }
                }
            }
            if (leave < 0) {
                return false;
            }
            pivot(leave, enter);
            reduced -= reduced(enter) * t_.row(leave).head(columns()).transpose();
        }
    }

    void pivot(int r, int c)
    {
        t_.row(r) /= t_(r, c);
        for (int i = 0; i < rows(); ++i) {
            if (i != r && t_(i, c) != Scalar(0)) {
                t_.row(i) -= t_(i, c) * t_.row(r);
            }
        }
        basis_[r] = c;
    }

private:
    Matrix t_;
    std::vector<int> basis_;
    Scalar tol_;
};

}  // namespace detail

/*!
 * Two-phase dense simplex with Bland's rule.
 *
 * Variables are shifted to their lower bounds; finite upper bounds become
 * explicit rows. Phase one minimizes the sum of artificial variables; a
 * residual above `tol` (scaled by the row norms) means infeasible.
 */
template <typename Scalar>
LpSolution<Scalar> solve_lp(const LinearProgram<Scalar>& lp, Scalar tol = Scalar(1e-9))
{
    using Matrix = typename LinearProgram<Scalar>::Matrix;
    using Vector = typename LinearProgram<Scalar>::Vector;

    lp.validate();
    const int n = lp.variables();

    // rows: equalities, inequalities, finite upper bounds (all in shifted y = x - lower)
    std::vector<int> bounded;
    for (int k = 0; k < n; ++k) {
        if (std::isfinite(lp.upper(k))) {
            bounded.push_back(k);
        }
    }
    const int m_eq = static_cast<int>(lp.eq_lhs.rows());
    const int m_ub = static_cast<int>(lp.ub_lhs.rows()) + static_cast<int>(bounded.size());
    const int m = m_eq + m_ub;

    Matrix a = Matrix::Zero(m, n);
    Vector b(m);
    if (m_eq > 0) {
        a.topRows(m_eq) = lp.eq_lhs;
        b.head(m_eq) = lp.eq_rhs - lp.eq_lhs * lp.lower;
    }
    for (int i = 0; i < lp.ub_lhs.rows(); ++i) {
        a.row(m_eq + i) = lp.ub_lhs.row(i);
        b(m_eq + i) = lp.ub_rhs(i) - lp.ub_lhs.row(i).dot(lp.lower);
    }
    for (std::size_t q = 0; q < bounded.size(); ++q) {
        const int row = m_eq + static_cast<int>(lp.ub_lhs.rows()) + static_cast<int>(q);
        a(row, bounded[q]) = Scalar(1);
        b(row) = lp.upper(bounded[q]) - lp.lower(bounded[q]);
    }

    // columns: n structural, m_ub slacks, then one artificial per row that needs it
    std::vector<int> needs_artificial;
    for (int i = 0; i < m; ++i) {
        if (i < m_eq || b(i) < Scalar(0)) {
            needs_artificial.push_back(i);
        }
    }
    const int n_art = static_cast<int>(needs_artificial.size());
    const int cols = n + m_ub + n_art;
    Matrix t = Matrix::Zero(m, cols + 1);
    std::vector<int> basis(static_cast<std::size_t>(m), -1);
    for (int i = 0; i < m; ++i) {
        const Scalar sign = b(i) < Scalar(0) ? Scalar(-1) : Scalar(1);
        t.row(i).head(n) = sign * a.row(i);
        if (i >= m_eq) {
            t(i, n + (i - m_eq)) = sign;
            if (sign > Scalar(0)) {
                basis[i] = n + (i - m_eq);
            }
        }
        t(i, cols) = sign * b(i);
    }
    for (int q = 0; q < n_art; ++q) {
        const int i = needs_artificial[q];
        t(i, n + m_ub + q) = Scalar(1);
        basis[i] = n + m_ub + q;
    }

    detail::Tableau<Scalar> tab(std::move(t), std::move(basis), tol);
    LpSolution<Scalar> out;

    if (n_art > 0) {
        Vector phase1 = Vector::Zero(cols);
        phase1.tail(n_art).setOnes();
        tab.minimize(phase1, cols);
        Scalar infeas(0);
        for (int i = 0; i < m; ++i) {
            if (tab.basis()[i] >= n + m_ub) {
                infeas += tab.rhs(i);
            }
        }
        const Scalar scale = Scalar(1) + (b.size() > 0 ? b.cwiseAbs().maxCoeff() : Scalar(0));
        if (infeas > tol * scale) {
            out.status = LpStatus::infeasible;
            return out;
        }
        // drive zero-level artificials out of the basis where possible
        for (int i = 0; i < m; ++i) {
            if (tab.basis()[i] >= n + m_ub) {
                for (int j = 0; j < n + m_ub; ++j) {
                    if (std::abs(tab.at(i, j)) > tol) {
                        tab.pivot(i, j);
                        break;
                    }
                }
            }
        }
    }

    Vector phase2 = Vector::Zero(cols);
    phase2.head(n) = lp.objective;
    if (!tab.minimize(phase2, n + m_ub)) {
        out.status = LpStatus::unbounded;
        return out;
    }

    Vector y = Vector::Zero(n);
    for (int i = 0; i < m; ++i) {
        if (tab.basis()[i] < n) {
            y(tab.basis()[i]) = tab.rhs(i);
        }
    }
    out.x = lp.lower + y;
    out.value = lp.evaluate(out.x);
    out.status = LpStatus::optimal;
    return out;
}

/// Plain-text dump: objective, constraint rows and bounds, one per line.
template <typename Scalar>
std::string to_text(const LinearProgram<Scalar>& lp)
{
    std::ostringstream os;
    os.precision(17);
    auto row_text = [&](const auto& row) {
        std::ostringstream r;
        r.precision(17);
        bool first = true;
        for (int j = 0; j < lp.variables(); ++j) {
            if (row(j) == Scalar(0)) {
                continue;
            }
            r << (first ? "" : " ") << (row(j) < 0 ? "- " : (first ? "" : "+ ")) << std::abs(row(j))
              << '*' << lp.names[static_cast<std::size_t>(j)];
            first = false;
        }
        return first ? std::string("0") : r.str();
    };
    os << "variables " << lp.variables() << '\n';
    os << "minimize " << row_text(lp.objective) << " + " << lp.objective_constant << '\n';
    for (int i = 0; i < lp.eq_lhs.rows(); ++i) {
        os << "eq " << row_text(lp.eq_lhs.row(i)) << " = " << lp.eq_rhs(i) << '\n';
    }
    for (int i = 0; i < lp.ub_lhs.rows(); ++i) {
        os << "le " << row_text(lp.ub_lhs.row(i)) << " <= " << lp.ub_rhs(i) << '\n';
    }
    for (int j = 0; j < lp.variables(); ++j) {
        os << "bound " << lp.lower(j) << " <= " << lp.names[static_cast<std::size_t>(j)] << " <= "
           << lp.upper(j) << '\n';
    }
    return os.str();
}

}  // namespace eqr
