#include "eqrecip/policy.hpp"

#include <array>
#include <sstream>
#include <algorithm>
#include <stdexcept>

#include "eqrecip/analytics.hpp"

namespace eqr {

SharingPolicy::SharingPolicy(int users) : users_(users)
{
    if (users < 1 || users > kMaxUsers) {
        throw std::invalid_argument("policy user count out of range");
    }
}

void SharingPolicy::set(int sender, UserMask receivers, double p)
{
    if (sender < 0 || sender >= users_) {
        throw std::invalid_argument("sender index out of range");
    }
    if (receivers == 0 || (receivers & ~full_mask(users_)) != 0 || has_user(receivers, sender)) {
        throw std::invalid_argument("receiver set must be nonempty, in range and exclude the sender");
    }
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("sharing probability " + entry_name(sender, receivers) +
                                    " outside [0, 1]");
    }
    entries_[{sender, receivers}] = p;
}

double SharingPolicy::get(int sender, UserMask receivers) const
{
    auto it = entries_.find({sender, receivers});
    return it == entries_.end() ? 0.0 : it->second;
}

bool SharingPolicy::contains(int sender, UserMask receivers) const
{
    return entries_.count({sender, receivers}) != 0;
}

std::string SharingPolicy::entry_name(int sender, UserMask receivers)
{
    std::string out = "p_{" + std::to_string(sender + 1) + "->";
    bool first = true;
    for (int j = 0; j < kMaxUsers; ++j) {
        if (has_user(receivers, j)) {
            if (!first) {
                out += ',';
            }
            out += std::to_string(j + 1);
            first = false;
        }
    }
    return out + "}";
}

std::string SharingPolicy::to_string() const
{
    std::ostringstream os;
    for (const auto& [key, p] : entries_) {
        os << entry_name(key.first, key.second) << " = " << p << '\n';
    }
    return os.str();
}

namespace {

constexpr std::array<std::string_view, kThreeUserVars> kNames = {
    "p_{1->2}", "p_{1->3}", "p_{2->1}", "p_{2->3}", "p_{3->1}",
    "p_{3->2}", "p_{1->2,3}", "p_{2->1,3}", "p_{3->1,2}"};

// bit i = user i (0-based)
constexpr std::array<SharingPolicy::Key, kThreeUserVars> kKeys = {{
    {0, 0b010}, {0, 0b100}, {1, 0b001}, {1, 0b100}, {2, 0b001},
    {2, 0b010}, {0, 0b110}, {1, 0b101}, {2, 0b011}}};

}  // namespace

std::string_view variable_name(ThreeUserVar v) { return kNames[index(v)]; }

SharingPolicy::Key variable_key(ThreeUserVar v) { return kKeys[index(v)]; }

SharingPolicy three_user_policy(const Eigen::Ref<const Eigen::VectorXd>& x)
{
    if (x.size() != kThreeUserVars) {
        throw std::invalid_argument("three-user policy needs 9 values");
    }
    SharingPolicy policy(3);
    for (int k = 0; k < kThreeUserVars; ++k) {
        // LP solutions can sit a rounding error outside the box
        const double p = std::min(1.0, std::max(0.0, x(k)));
        policy.set(kKeys[k].first, kKeys[k].second, p);
    }
    return policy;
}

Eigen::VectorXd three_user_vector(const SharingPolicy& policy)
{
    if (policy.users() != 3) {
        throw std::invalid_argument("not a three-user policy");
    }
    Eigen::VectorXd x(kThreeUserVars);
    for (int k = 0; k < kThreeUserVars; ++k) {
        x(k) = policy.get(kKeys[k].first, kKeys[k].second);
    }
    return x;
}

SharingPolicy pair_optimum_policy(double pe1, double pe2)
{
    if (pe1 > pe2) {
        throw std::invalid_argument("pair optimum needs p_e1 <= p_e2");
    }
    SharingPolicy policy(2);
    policy.set(0, 0b10, pair_share_probability(pe1, pe2));
    policy.set(1, 0b01, 1.0);
    return policy;
}

SharingPolicy uniform_policy(int users)
{
    SharingPolicy policy(users);
    const UserMask all = full_mask(users);
    for (UserMask r = 1; r < all; ++r) {
        const double p = 1.0 / static_cast<double>(users - popcount(r));
        for (int i = 0; i < users; ++i) {
            if (!has_user(r, i)) {
                policy.set(i, r, p);
            }
        }
    }
    return policy;
}

}  // namespace eqr
