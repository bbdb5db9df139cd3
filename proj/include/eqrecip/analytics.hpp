#pragma once

// Closed-form completion times, improvement ratios, stability bounds and the
// download/upload utility for equal-reciprocal sharing. Every function is a
// pure template on the scalar type. A completion time that is infinite
// (certain erasure) is returned as `unbounded<Scalar>()`; arguments outside
// their domain throw std::invalid_argument.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace eqr {

template <typename Scalar>
constexpr Scalar unbounded()
{
    return std::numeric_limits<Scalar>::infinity();
}

template <typename Scalar>
bool is_unbounded(Scalar x)
{
    return std::isinf(x) && x > 0;
}

namespace detail {

template <typename Scalar>
void require_probability(Scalar p, const char* name)
{
    if (!(p >= Scalar(0) && p <= Scalar(1))) {
        throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
    }
}

template <typename Scalar>
Scalar binomial(int n, int k)
{
    Scalar c(1);
    for (int j = 1; j <= k; ++j) {
        c = c * Scalar(n - k + j) / Scalar(j);
    }
    return c;
}

template <typename Scalar>
Scalar ipow(Scalar x, int n)
{
    Scalar r(1);
    for (int i = 0; i < n; ++i) {
        r *= x;
    }
    return r;
}

}  // namespace detail

template <typename Scalar>
struct CompletionTimes {
    Scalar t_eq;     ///< BS broadcast only, no sharing
    Scalar t_neq;    ///< BS unicast; NaN where not defined
    Scalar t_union;  ///< optimal equal-reciprocal sharing
    Scalar t_full;   ///< full cooperation benchmark
};

template <typename Scalar>
struct UtilityBreakdown {
    Scalar download;
    Scalar upload;
    Scalar utility;  ///< download - upload
};

template <typename Scalar>
struct AsymmetricTwoUser {
    CompletionTimes<Scalar> times;
    Scalar p_star_12;
    Scalar p_star_21;
};

template <typename Scalar>
struct MarkovTwoUser {
    Scalar t_eq;
    Scalar t_union;
    Scalar ratio;
};

template <typename Scalar>
struct LossyD2dTwoUser {
    Scalar p_star;
    Scalar t_union;
    Scalar ratio;  ///< T_= / T*_union
};

template <typename Scalar>
struct StabilityBounds {
    Scalar centralized;
    Scalar distributed;
    Scalar ratio;
};

// ---------------------------------------------------------------------------
// Two symmetric users

/// Broadcast-only completion time, (2p+1)/(1-p^2).
template <typename Scalar>
Scalar t_eq_two_symmetric(Scalar pe)
{
    detail::require_probability(pe, "p_e");
    if (pe == Scalar(1)) {
        return unbounded<Scalar>();
    }
    return (2 * pe + 1) / (1 - pe * pe);
}

/// Opportunistic unicast completion time, (p+2)/(1-p^2).
template <typename Scalar>
Scalar t_neq_two_symmetric(Scalar pe)
{
    detail::require_probability(pe, "p_e");
    if (pe == Scalar(1)) {
        return unbounded<Scalar>();
    }
    return (pe + 2) / (1 - pe * pe);
}

/// Gain of identifying the common interest: T_neq / T_eq.
template <typename Scalar>
Scalar improvement_ratio_identify(Scalar pe)
{
    detail::require_probability(pe, "p_e");
    return (pe + 2) / (2 * pe + 1);
}

template <typename Scalar>
Scalar t_union_two_symmetric(Scalar pe)
{
    detail::require_probability(pe, "p_e");
    if (pe == Scalar(1)) {
        return unbounded<Scalar>();
    }
    return (-2 * pe * pe + 2 * pe + 1) / (1 - pe * pe);
}

/// Gain of social grouping: T_eq / T*_union. Finite on all of [0, 1].
template <typename Scalar>
Scalar improvement_ratio_social(Scalar pe)
{
    detail::require_probability(pe, "p_e");
    return (2 * pe + 1) / (-2 * pe * pe + 2 * pe + 1);
}

// ---------------------------------------------------------------------------
// N symmetric users

/*!
 * Broadcast-only completion time for n symmetric users.
 *
 * Solves T(m) = sum_{i=0}^{m} C(m,i) p^i (1-p)^(m-i) (1 + T(i)), m = 1..n,
 * with T(0) = 0. The i = m term refers to T(m) itself and is moved to the
 * left-hand side.
 */
template <typename Scalar>
Scalar t_eq_n_symmetric(Scalar pe, int n)
{
    detail::require_probability(pe, "p_e");
    if (n < 1) {
        throw std::invalid_argument("N must be at least 1");
    }
    if (pe == Scalar(1)) {
        return unbounded<Scalar>();
    }
    std::vector<Scalar> t(static_cast<std::size_t>(n) + 1, Scalar(0));
    const Scalar q = 1 - pe;
    for (int m = 1; m <= n; ++m) {
        Scalar acc(0);
        for (int i = 0; i < m; ++i) {
            acc += detail::binomial<Scalar>(m, i) * detail::ipow(pe, i) * detail::ipow(q, m - i) *
                   (1 + t[i]);
        }
        const Scalar pm = detail::ipow(pe, m);
        t[m] = (acc + pm) / (1 - pm);
    }
    return t[n];
}

/// Completion time with the uniform sharer rule 1/(N - |R|).
template <typename Scalar>
Scalar t_union_n_symmetric(Scalar pe, int n)
{
    detail::require_probability(pe, "p_e");
    if (n < 1) {
        throw std::invalid_argument("N must be at least 1");
    }
    if (pe == Scalar(1)) {
        return unbounded<Scalar>();
    }
    using std::pow;
    return 1 + (1 - pow(1 - pe, n)) / (1 - pow(pe, n));
}

// ---------------------------------------------------------------------------
// Two asymmetric users, p_e1 <= p_e2

/// Equal-reciprocal share probability of the better user towards the worse one.
template <typename Scalar>
Scalar pair_share_probability(Scalar pe_better, Scalar pe_worse)
{
    const Scalar denom = (1 - pe_better) * pe_worse;
    if (denom == Scalar(0)) {
        return Scalar(1);
    }
    return (1 - pe_worse) * pe_better / denom;
}

template <typename Scalar>
Scalar t_union_asym_two(Scalar p1, Scalar p2)
{
    detail::require_probability(p1, "p_e1");
    detail::require_probability(p2, "p_e2");
    if (p1 > p2) {
        throw std::invalid_argument("asymmetric two-user formulas need p_e1 <= p_e2");
    }
    if (p2 == Scalar(1)) {
        return unbounded<Scalar>();
    }
    // (1-p1) p2 p*_12 = (1-p2) p1, so the p* branch is expanded without dividing by p2.
    const Scalar num = p1 * p2 + (1 - p1) * (1 - p2) + 4 * (1 - p2) * p1 +
                       (p2 - p1) * (1 + 1 / (1 - p2));
    return num / (1 - p1 * p2);
}

template <typename Scalar>
AsymmetricTwoUser<Scalar> asym_two_user(Scalar p1, Scalar p2)
{
    detail::require_probability(p1, "p_e1");
    detail::require_probability(p2, "p_e2");
    if (p1 > p2) {
        throw std::invalid_argument("asymmetric two-user formulas need p_e1 <= p_e2");
    }
    AsymmetricTwoUser<Scalar> out;
    out.p_star_12 = pair_share_probability(p1, p2);
    out.p_star_21 = Scalar(1);
    out.times.t_neq = std::numeric_limits<Scalar>::quiet_NaN();
    if (p2 == Scalar(1)) {
        out.times.t_eq = out.times.t_union = out.times.t_full = unbounded<Scalar>();
        return out;
    }
    const Scalar d = 1 - p1 * p2;
    const Scalar base = p1 * p2 + (1 - p1) * (1 - p2);
    out.times.t_eq = (base + p1 * (1 - p2) * (1 + 1 / (1 - p1)) +
                      p2 * (1 - p1) * (1 + 1 / (1 - p2))) /
                     d;
    out.times.t_full = (base + 2 * p1 * (1 - p2) + 2 * p2 * (1 - p1)) / d;
    out.times.t_union = t_union_asym_two(p1, p2);
    return out;
}

/// Loss of the equal-reciprocal optimum against full cooperation.
template <typename Scalar>
Scalar asym_cooperation_loss(Scalar p1, Scalar p2)
{
    const Scalar delta = p2 - p1;
    return delta / (1 - (p2 - delta) * p2) * (1 / (1 - p2) - 1);
}

// ---------------------------------------------------------------------------
// Asymmetric N users (error probabilities as an Eigen vector)

/*!
 * Broadcast-only completion time for arbitrary per-user error
 * probabilities, by recursion over the set of users still missing the
 * packet.
 */
template <typename Derived>
typename Derived::Scalar t_eq_asymmetric(const Eigen::MatrixBase<Derived>& pe)
{
    using Scalar = typename Derived::Scalar;
    const int n = static_cast<int>(pe.size());
    if (n < 1 || n > 16) {
        throw std::invalid_argument("t_eq_asymmetric supports 1..16 users");
    }
    for (int i = 0; i < n; ++i) {
        detail::require_probability(pe(i), "p_e");
    }
    const unsigned full = (1U << n) - 1;
    std::vector<Scalar> e(full + 1, Scalar(0));
    for (unsigned s = 1; s <= full; ++s) {
        Scalar all_off(1);
        for (int i = 0; i < n; ++i) {
            if ((s >> i) & 1U) {
                all_off *= pe(i);
            }
        }
        if (all_off == Scalar(1)) {
            e[s] = unbounded<Scalar>();
            continue;
        }
        Scalar acc(1);
        // proper submasks `rest` = users of s still missing after this slot
        for (unsigned rest = (s - 1) & s;; rest = (rest - 1) & s) {
            Scalar p(1);
            for (int i = 0; i < n; ++i) {
                if ((s >> i) & 1U) {
                    p *= ((rest >> i) & 1U) ? pe(i) : 1 - pe(i);
                }
            }
            if (p != Scalar(0)) {
                acc += p * e[rest];
            }
            if (rest == 0) {
                break;
            }
        }
        e[s] = acc / (1 - all_off);
    }
    return e[full];
}

/// Full cooperation: any first reception is followed by one local broadcast.
template <typename Derived>
typename Derived::Scalar t_full_asymmetric(const Eigen::MatrixBase<Derived>& pe)
{
    using Scalar = typename Derived::Scalar;
    for (int i = 0; i < pe.size(); ++i) {
        detail::require_probability(pe(i), "p_e");
    }
    const Scalar all_off = pe.prod();
    const Scalar all_on = (Scalar(1) - pe.array()).prod();
    if (all_off == Scalar(1)) {
        return unbounded<Scalar>();
    }
    return (2 - all_on - all_off) / (1 - all_off);
}

// ---------------------------------------------------------------------------
// Extensions: Markov channels, lossy D2D, utility, stability

template <typename Scalar>
MarkovTwoUser<Scalar> markov_two_symmetric(Scalar zeta_01, Scalar zeta_10)
{
    detail::require_probability(zeta_01, "zeta_01");
    detail::require_probability(zeta_10, "zeta_10");
    if (zeta_01 == Scalar(0)) {
        return {unbounded<Scalar>(), unbounded<Scalar>(), std::numeric_limits<Scalar>::quiet_NaN()};
    }
    const Scalar pi0 = zeta_10 / (zeta_01 + zeta_10);
    const Scalar denom = 1 - pi0 * pi0;
    MarkovTwoUser<Scalar> out;
    out.t_eq = (1 + 2 * pi0 * (1 - pi0) / zeta_01) / denom;
    out.t_union = (-2 * pi0 * pi0 + 2 * pi0 + 1) / denom;
    out.ratio = (2 * pi0 * (1 - pi0) / zeta_01 + 1) / (-2 * pi0 * pi0 + 2 * pi0 + 1);
    return out;
}

/*!
 * Two symmetric users whose D2D link drops a share with probability gamma.
 * Sharing pays off only while gamma <= p_e; otherwise p* = 0 and the group
 * falls back to broadcast-only delivery.
 */
template <typename Scalar>
LossyD2dTwoUser<Scalar> unreliable_local_two_symmetric(Scalar pe, Scalar gamma)
{
    detail::require_probability(pe, "p_e");
    detail::require_probability(gamma, "gamma");
    if (gamma <= pe && gamma < Scalar(1)) {
        const Scalar share = 2 * pe * (1 - pe) / (1 - gamma);
        LossyD2dTwoUser<Scalar> out;
        out.p_star = Scalar(1);
        out.t_union = pe == Scalar(1) ? unbounded<Scalar>() : (1 + share) / (1 - pe * pe);
        out.ratio = (2 * pe + 1) / (share + 1);
        return out;
    }
    return {Scalar(0), t_eq_two_symmetric(pe), Scalar(1)};
}

/// Expected packets downloaded from / uploaded to the group per packet, uniform sharer rule.
template <typename Scalar>
UtilityBreakdown<Scalar> utility_n_symmetric(Scalar pe, int n)
{
    detail::require_probability(pe, "p_e");
    if (n < 2) {
        throw std::invalid_argument("utility needs N >= 2");
    }
    const Scalar q = 1 - pe;
    UtilityBreakdown<Scalar> out;
    out.download = pe * (1 - detail::ipow(pe, n - 1));
    Scalar sum(0);
    for (int i = 0; i <= n - 1; ++i) {
        sum += detail::binomial<Scalar>(n - 1, i) * detail::ipow(q, i) *
               detail::ipow(pe, n - 1 - i) / Scalar(i + 1);
    }
    out.upload = q * sum;
    out.utility = out.download - out.upload;
    return out;
}

template <typename Scalar>
StabilityBounds<Scalar> stability_bounds_two_symmetric(Scalar pe)
{
    detail::require_probability(pe, "p_e");
    const Scalar frame = 1 + 2 * pe - 2 * pe * pe;
    const Scalar central = 1 - pe * pe;
    return {central, central / frame, frame};
}

}  // namespace eqr
