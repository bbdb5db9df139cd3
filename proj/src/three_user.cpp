#include "eqrecip/three_user.hpp"

#include <stdexcept>
#include <string>

#include "eqrecip/analytics.hpp"

namespace eqr {

namespace {

using V = ThreeUserVar;

double prob(const Eigen::Vector3d& pe, int k)
{
    const std::array<double, 3> p = {pe(0), pe(1), pe(2)};
    return state_probability(p, three_user_case(k));
}

}  // namespace

void require_sorted_triple(const Eigen::Vector3d& pe)
{
    for (int i = 0; i < 3; ++i) {
        if (!(pe(i) >= 0.0 && pe(i) < 1.0)) {
            throw std::invalid_argument("three-user error probabilities must lie in [0, 1)");
        }
    }
    if (pe(0) > pe(1) || pe(1) > pe(2)) {
        throw std::invalid_argument("three-user error probabilities must be sorted ascending");
    }
}

ChannelStateVector three_user_case(int k)
{
    switch (k) {
    case 1: return {0, 1, 1};
    case 2: return {1, 0, 1};
    case 3: return {1, 1, 0};
    case 4: return {0, 0, 1};
    case 5: return {0, 1, 0};
    case 6: return {1, 0, 0};
    case 7: return {1, 1, 1};
    case 8: return {0, 0, 0};
    default: throw std::out_of_range("case index must be 1..8");
    }
}

std::array<double, 8> case_probabilities(const Eigen::Vector3d& pe)
{
    std::array<double, 8> out{};
    for (int k = 1; k <= 8; ++k) {
        out[k - 1] = prob(pe, k);
    }
    return out;
}

std::array<AffineForm, 7> case_time_forms(const Eigen::Vector3d& pe)
{
    require_sorted_triple(pe);
    std::array<AffineForm, 7> t;
    t[0].constant = 2.0;
    t[1].constant = 2.0;
    t[3].constant = 2.0;
    t[6].constant = 1.0;

    // case 3: c3 alone is missing
    const double retry3 = 1.0 + 1.0 / (1.0 - pe(2));
    t[2].constant = retry3;
    t[2].coeff(index(V::p13)) = 2.0 - retry3;
    t[2].coeff(index(V::p23)) = 2.0 - retry3;

    // case 5: only c2 holds; on decline c1 and c3 continue under their pair optimum
    const double cont5 = 1.0 + t_union_asym_two(pe(0), pe(2));
    t[4].constant = cont5;
    t[4].coeff(index(V::p2_13)) = 2.0 - cont5;

    // case 6: only c1 holds; c2 and c3 continue
    const double cont6 = 1.0 + t_union_asym_two(pe(1), pe(2));
    t[5].constant = cont6;
    t[5].coeff(index(V::p1_23)) = 2.0 - cont6;
    return t;
}

AffineForm union_time_form(const Eigen::Vector3d& pe)
{
    const auto forms = case_time_forms(pe);
    const auto p = case_probabilities(pe);
    AffineForm total;
    total.constant = p[7];
    for (int k = 0; k < 7; ++k) {
        total.constant += p[k] * forms[k].constant;
        total.coeff += p[k] * forms[k].coeff;
    }
    const double norm = 1.0 - pe.prod();
    total.constant /= norm;
    total.coeff /= norm;
    return total;
}

double three_user_union_time(const Eigen::Vector3d& pe, const SharingPolicy& policy)
{
    return union_time_form(pe).evaluate(three_user_vector(policy));
}

std::array<double, 8> case_completion_times(const Eigen::Vector3d& pe, const SharingPolicy& policy)
{
    const Eigen::VectorXd x = three_user_vector(policy);
    const auto forms = case_time_forms(pe);
    std::array<double, 8> out{};
    for (int k = 0; k < 7; ++k) {
        out[k] = forms[k].evaluate(x);
    }
    out[7] = union_time_form(pe).evaluate(x);
    return out;
}

LinearProgram<double> build_three_user_lp(const Eigen::Vector3d& pe, ReciprocityForm form)
{
    require_sorted_triple(pe);
    const double p1 = pe(0), p2 = pe(1), p3 = pe(2);

    LinearProgram<double> lp(kThreeUserVars);
    for (int k = 0; k < kThreeUserVars; ++k) {
        lp.names[k] = std::string(variable_name(static_cast<V>(k)));
    }
    const AffineForm objective = union_time_form(pe);
    lp.objective = objective.coeff;
    lp.objective_constant = objective.constant;
    lp.upper.setOnes();

    auto row = [] { return Eigen::VectorXd::Zero(kThreeUserVars).eval(); };

    // c1 <-> c2
    Eigen::VectorXd r = row();
    r(index(V::p1_23)) += (1 - p1) * p2 * p3;
    r(index(V::p12)) += (1 - p1) * p2 * (1 - p3);
    r(index(V::p2_13)) -= p1 * (1 - p2) * p3;
    r(index(V::p21)) -= p1 * (1 - p2) * (1 - p3);
    lp.add_equality(r, 0.0);

    // c1 <-> c3
    r = row();
    r(index(V::p1_23)) += (1 - p1) * p3 * p2;
    r(index(V::p13)) += (1 - p1) * p3 * (1 - p2);
    r(index(V::p3_12)) -= p1 * (1 - p3) * p2;
    r(index(V::p31)) -= p1 * (1 - p3) * (1 - p2);
    lp.add_equality(r, 0.0);

    // c2 <-> c3
    const double lhs = (1 - p2) * p3;
    const double rhs = form == ReciprocityForm::balanced ? p2 * (1 - p3) : p3 * (1 - p2);
    r = row();
    r(index(V::p2_13)) += lhs * p1;
    r(index(V::p23)) += lhs * (1 - p1);
    r(index(V::p3_12)) -= rhs * p1;
    r(index(V::p32)) -= rhs * (1 - p1);
    lp.add_equality(r, 0.0);

    // one sharer in cases 1 and 2, at most one in case 3
    r = row();
    r(index(V::p21)) = 1;
    r(index(V::p31)) = 1;
    lp.add_equality(r, 1.0);
    r = row();
    r(index(V::p12)) = 1;
    r(index(V::p32)) = 1;
    lp.add_equality(r, 1.0);
    r = row();
    r(index(V::p13)) = 1;
    r(index(V::p23)) = 1;
    lp.add_inequality(r, 1.0);

    // case 4: the worst user always shares
    r = row();
    r(index(V::p3_12)) = 1;
    lp.add_equality(r, 1.0);
    return lp;
}

Eigen::Vector3d reciprocity_residuals(const Eigen::Vector3d& pe, const Eigen::VectorXd& x)
{
    const double p1 = pe(0), p2 = pe(1), p3 = pe(2);
    auto v = [&](V var) { return x(index(var)); };
    Eigen::Vector3d res;
    res(0) = (1 - p1) * p2 * (p3 * v(V::p1_23) + (1 - p3) * v(V::p12)) -
             p1 * (1 - p2) * (p3 * v(V::p2_13) + (1 - p3) * v(V::p21));
    res(1) = (1 - p1) * p3 * (p2 * v(V::p1_23) + (1 - p2) * v(V::p13)) -
             p1 * (1 - p3) * (p2 * v(V::p3_12) + (1 - p2) * v(V::p31));
    res(2) = (1 - p2) * p3 * (p1 * v(V::p2_13) + (1 - p1) * v(V::p23)) -
             p2 * (1 - p3) * (p1 * v(V::p3_12) + (1 - p1) * v(V::p32));
    return res;
}

ThreeUserOptimum optimal_three_user(const Eigen::Vector3d& pe, ReciprocityForm form)
{
    ThreeUserOptimum out;
    out.solution = solve_lp(build_three_user_lp(pe, form));
    if (out.solution.status != LpStatus::optimal) {
        throw std::runtime_error("three-user LP is " + std::string(to_string(out.solution.status)) +
                                 " at p_e = (" + std::to_string(pe(0)) + ", " +
                                 std::to_string(pe(1)) + ", " + std::to_string(pe(2)) + ")");
    }
    out.policy = three_user_policy(out.solution.x);
    return out;
}

double t_pair_plus_outsider(const Eigen::Vector3d& pe)
{
    require_sorted_triple(pe);
    // phase: 0 = no share decision yet, 1 = share scheduled for the next slot, 2 = declined
    constexpr int kPhases = 3;
    constexpr int kHolderSets = 7;  // holder masks 0..6; 7 is absorbing
    const int n = kPhases * kHolderSets;
    auto id = [](int holders, int phase) { return phase * kHolderSets + holders; };

    const std::array<double, 2> share = {pair_share_probability(pe(0), pe(1)), 1.0};
    constexpr UserMask kGroup = 0b011;

    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Ones(n);

    auto add = [&](int from, UserMask to_holders, int to_phase, double p) {
        if (p == 0.0 || to_holders == 0b111) {
            return;
        }
        a(from, id(static_cast<int>(to_holders), to_phase)) -= p;
    };

    for (int phase = 0; phase < kPhases; ++phase) {
        for (int h = 0; h < kHolderSets; ++h) {
            const int from = id(h, phase);
            const UserMask holders = static_cast<UserMask>(h);
            if (phase == 1) {
                // local broadcast completes the group; the outsider cannot decode it
                add(from, holders | kGroup, 2, 1.0);
                continue;
            }
            const UserMask missing = ~holders & 0b111;
            // enumerate which missing users the BS broadcast reaches
            for (UserMask got = 0; got <= 0b111; ++got) {
                if ((got & ~missing) != 0) {
                    continue;
                }
                double p = 1.0;
                for (int i = 0; i < 3; ++i) {
                    if (has_user(missing, i)) {
                        p *= has_user(got, i) ? 1.0 - pe(i) : pe(i);
                    }
                }
                const UserMask next = holders | got;
                const UserMask group_holders = next & kGroup;
                if (phase == 0 && popcount(group_holders) == 1) {
                    const int sharer = has_user(group_holders, 0) ? 0 : 1;
                    add(from, next, 1, p * share[sharer]);
                    add(from, next, 2, p * (1.0 - share[sharer]));
                } else {
                    add(from, next, phase, p);
                }
            }
        }
    }
    const Eigen::VectorXd times = a.partialPivLu().solve(rhs);
    return times(id(0, 0));
}

GroupingComparison grouping_compare(const Eigen::Vector3d& pe)
{
    GroupingComparison out;
    out.t_g1 = t_pair_plus_outsider(pe);
    out.t_g2 = optimal_three_user(pe).solution.value;
    out.ratio = out.t_g1 / out.t_g2;
    return out;
}

}  // namespace eqr
