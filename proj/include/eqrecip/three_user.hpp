#pragma once

// Optimal equal-reciprocal sharing for three asymmetric users: the eight
// first-slot cases, the linear program over the nine sharing probabilities,
// and the comparison against leaving the worst user out of the group.

#include <array>

#include <Eigen/Dense>

#include "eqrecip/channel.hpp"
#include "eqrecip/linear_program.hpp"
#include "eqrecip/policy.hpp"

namespace eqr {

/// c + coeff . x over the nine three-user variables.
struct AffineForm {
    double constant = 0.0;
    Eigen::VectorXd coeff = Eigen::VectorXd::Zero(kThreeUserVars);

    double evaluate(const Eigen::VectorXd& x) const { return constant + coeff.dot(x); }
};

/// First-slot channel vector of case k (k = 1..8): (0,1,1), (1,0,1), (1,1,0),
/// (0,0,1), (0,1,0), (1,0,0), (1,1,1), (0,0,0).
ChannelStateVector three_user_case(int k);

/// P(case k) for k = 1..8.
std::array<double, 8> case_probabilities(const Eigen::Vector3d& pe);

/// T_1..T_7 as affine functions of the policy; case 8 restarts the process
/// and is folded into the normalization of union_time_form.
std::array<AffineForm, 7> case_time_forms(const Eigen::Vector3d& pe);

/// Numeric T_1..T_8 under `policy`; T_8 equals the resulting overall time.
std::array<double, 8> case_completion_times(const Eigen::Vector3d& pe, const SharingPolicy& policy);

/// The overall completion time as an affine function of the policy.
AffineForm union_time_form(const Eigen::Vector3d& pe);

double three_user_union_time(const Eigen::Vector3d& pe, const SharingPolicy& policy);

/// Which form of the c2 <-> c3 reciprocity row to build.
enum class ReciprocityForm {
    balanced,    ///< (1-p2) p3 [..c2..] = p2 (1-p3) [..c3..], same pattern as the other pairs
    same_coefficient,  ///< p3 (1-p2) on both sides
};

LinearProgram<double> build_three_user_lp(const Eigen::Vector3d& pe,
                                          ReciprocityForm form = ReciprocityForm::balanced);

/// Expected deliveries i->j minus j->i per first slot, for pairs (1,2), (1,3), (2,3).
Eigen::Vector3d reciprocity_residuals(const Eigen::Vector3d& pe, const Eigen::VectorXd& x);

struct ThreeUserOptimum {
    LpSolution<double> solution;
    SharingPolicy policy{3};
};

/// Solves the three-user program; throws std::runtime_error unless optimal.
ThreeUserOptimum optimal_three_user(const Eigen::Vector3d& pe,
                                    ReciprocityForm form = ReciprocityForm::balanced);

/*!
 * Completion time when (c1, c2) share under their pair optimum and c3 is
 * served only by BS broadcasts. Computed as the expected absorption time of
 * the slot-level Markov chain over (holders, share phase).
 */
double t_pair_plus_outsider(const Eigen::Vector3d& pe);

struct GroupingComparison {
    double t_g1;   ///< (c1, c2) grouped, c3 outside
    double t_g2;   ///< all three grouped, LP optimum
    double ratio;  ///< t_g1 / t_g2
};

GroupingComparison grouping_compare(const Eigen::Vector3d& pe);

void require_sorted_triple(const Eigen::Vector3d& pe);

}  // namespace eqr
