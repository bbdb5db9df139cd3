#pragma once

// Monte Carlo replay of single-packet dissemination: BS broadcasts over
// erasure channels, optional local D2D sharing decided by a policy, one
// transmission per slot. Used as the independent check on every closed form
// and LP optimum.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "eqrecip/channel.hpp"
#include "eqrecip/policy.hpp"

namespace eqr {

enum class Strategy {
    no_sharing,     ///< BS broadcast until everyone holds the packet
    unicast,        ///< BS serves one missing user per slot, lowest index first among ON channels
    always_share,   ///< full cooperation: the lowest-index holder always shares
    uniform_share,  ///< sharer drawn uniformly among holders, p = 1/(N - |R|)
    policy,         ///< explicit SharingPolicy (e.g. the LP optimum)
};

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

struct DisseminationConfig {
    std::vector<ChannelModel> channels;
    D2dChannel d2d;
    Strategy strategy = Strategy::no_sharing;
    std::optional<SharingPolicy> policy;  ///< required for Strategy::policy
    UserMask group = 0;                   ///< users able to share/decode locally; 0 = everyone
    std::uint64_t trials = 100000;
    std::uint64_t seed = 1;
    std::uint64_t slot_cap = 1000000;  ///< per-trial limit; longer trials are censored
    unsigned workers = 0;              ///< 0 = hardware concurrency

    int users() const { return static_cast<int>(channels.size()); }
    UserMask group_mask() const { return group == 0 ? full_mask(users()) : group; }
};

void validate(const DisseminationConfig& cfg);

struct TrialOutcome {
    std::uint64_t completion_slots = 0;
    bool censored = false;
    std::vector<std::uint32_t> shares_sent;         ///< local broadcasts started, per user
    std::vector<std::uint32_t> received_via_d2d;    ///< packets obtained locally, per user
    std::vector<std::uint32_t> sharer_assignments;  ///< times picked as sharer (uniform rule counts the no-op pick too)
    std::vector<std::uint32_t> deliveries;          ///< row-major n x n, i -> j local deliveries
};

/// Runs trial `index` of the experiment on its own substream.
TrialOutcome run_trial(const DisseminationConfig& cfg, std::uint64_t index);

struct SimulationSummary {
    std::uint64_t trials = 0;
    std::uint64_t censored = 0;
    double mean = 0.0;       ///< completion slots over uncensored trials
    double std_error = 0.0;  ///< sample std / sqrt(trials)
    Eigen::VectorXd shares_sent;
    Eigen::VectorXd received_via_d2d;
    Eigen::VectorXd sharer_assignments;
    Eigen::MatrixXd deliveries;    ///< mean i -> j local deliveries per packet
    Eigen::MatrixXd asymmetry_se;  ///< SE of deliveries(i,j) - deliveries(j,i)
    double download_upload_ratio = 0.0;  ///< group totals: received_via_d2d / sharer_assignments
    double download_upload_ratio_se = 0.0;
};

SimulationSummary simulate_completion(const DisseminationConfig& cfg);

struct ReciprocityMatrix {
    Eigen::MatrixXd mean;
    Eigen::MatrixXd asymmetry_se;

    /// Largest |mean(i,j) - mean(j,i)| in units of its standard error.
    double max_asymmetry_z() const;
};

ReciprocityMatrix measure_reciprocity(const DisseminationConfig& cfg);

std::string summary_csv_header(int users);
std::string summary_csv_row(std::string_view policy_name, std::string_view parameters,
                            const SimulationSummary& s);

}  // namespace eqr
