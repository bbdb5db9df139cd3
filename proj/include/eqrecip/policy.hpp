#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "eqrecip/channel.hpp"

namespace eqr {

/*!
 * Sharing probabilities p_{i->R}: the probability that user i, holding the
 * packet, broadcasts it locally to the set R of users still missing it.
 * Users are 0-based; printed names are 1-based.
 */
class SharingPolicy {
public:
    using Key = std::pair<int, UserMask>;

    explicit SharingPolicy(int users);

    int users() const { return users_; }

    void set(int sender, UserMask receivers, double p);

    /// 0 when the entry is absent.
    double get(int sender, UserMask receivers) const;

    bool contains(int sender, UserMask receivers) const;

    const std::map<Key, double>& entries() const { return entries_; }

    static std::string entry_name(int sender, UserMask receivers);

    std::string to_string() const;

private:
    int users_;
    std::map<Key, double> entries_;
};

/// Decision variables of the three-user linear program, in column order.
enum class ThreeUserVar : int { p12, p13, p21, p23, p31, p32, p1_23, p2_13, p3_12 };

inline constexpr int kThreeUserVars = 9;

constexpr int index(ThreeUserVar v) { return static_cast<int>(v); }

std::string_view variable_name(ThreeUserVar v);

/// (sender, receiver mask) of a three-user variable.
SharingPolicy::Key variable_key(ThreeUserVar v);

SharingPolicy three_user_policy(const Eigen::Ref<const Eigen::VectorXd>& x);

Eigen::VectorXd three_user_vector(const SharingPolicy& policy);

/// Two users with p_e1 <= p_e2: p_{1->2} = p*, p_{2->1} = 1.
SharingPolicy pair_optimum_policy(double pe1, double pe2);

/// p_{i->R} = 1/(N - |R|) for every holder i and nonempty R.
SharingPolicy uniform_policy(int users);

}  // namespace eqr
