#pragma once

// Back-pressure scheduling over the virtual network with equal-reciprocity
// counters, for packets arriving at the BS over time.

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "eqrecip/channel.hpp"
#include "eqrecip/virtual_net.hpp"

namespace eqr {

enum class SchedulingMode {
    centralized,  ///< max-weight over every ON link
    distributed,  ///< a BS-to-user hand-off forces that user's share in the next slot
    no_grouping,  ///< local sharing links removed, BS retransmissions only
};

std::string_view to_string(SchedulingMode m);
SchedulingMode parse_scheduling_mode(std::string_view name);

struct ForcedShare {
    int user;
    std::uint64_t packet;
};

struct PacketRecord {
    std::uint64_t arrival_slot;
    UserMask holders = 0;  ///< who really holds it, independent of its virtual position
};

/// Queues, reciprocity counters and per-packet shadow state of one replica.
class SchedulerState {
public:
    explicit SchedulerState(const VirtualNetwork& net);

    int users() const { return users_; }
    std::uint64_t slot() const { return t_; }

    std::size_t queue_size(int node) const { return queues_[node].size(); }
    const std::deque<std::uint64_t>& queue(int node) const { return queues_[node]; }
    std::size_t total_queued() const { return queued_; }

    /// H(i, j) for i < j: shares assigned i -> j minus j -> i. Signed.
    std::int64_t h(int i, int j) const;

    const std::optional<ForcedShare>& forced_share() const { return forced_; }

    std::uint64_t arrived() const { return next_packet_; }
    std::uint64_t absorbed() const { return absorbed_; }
    std::uint64_t shared() const { return shared_; }

    const PacketRecord& packet(std::uint64_t id) const { return packets_.at(id); }

    /// Enqueues a new packet at v_a, stamped with the current slot.
    std::uint64_t add_arrival();

private:
    friend struct SchedulerOps;

    int users_;
    std::vector<std::deque<std::uint64_t>> queues_;
    std::vector<std::int64_t> h_;
    std::uint64_t t_ = 0;
    std::optional<ForcedShare> forced_;
    std::unordered_map<std::uint64_t, PacketRecord> packets_;
    std::uint64_t next_packet_ = 0;
    std::uint64_t absorbed_ = 0;
    std::uint64_t shared_ = 0;
    std::size_t queued_ = 0;
};

struct StepDecision {
    int link = -1;  ///< -1 = no transmission
    double value = 0.0;
    bool forced = false;
    std::optional<std::uint64_t> completion_time;  ///< set when a packet reached the destination
};

/// Max-weight choice among ON links with a positive weight; ties go to the lowest link id.
StepDecision centralized_step(SchedulerState& state, const VirtualNetwork& net,
                              const ChannelStateVector& s);

/// Forced share if one is pending, else max-weight with half weight on BS-to-user links
/// and without user-to-destination links.
StepDecision distributed_step(SchedulerState& state, const VirtualNetwork& net,
                              const ChannelStateVector& s);

/// Centralized choice restricted to BS retransmission links.
StepDecision no_grouping_step(SchedulerState& state, const VirtualNetwork& net,
                              const ChannelStateVector& s);

StepDecision step(SchedulingMode mode, SchedulerState& state, const VirtualNetwork& net,
                  const ChannelStateVector& s);

struct DynamicConfig {
    std::vector<ChannelModel> channels;
    double arrival_rate = 0.0;  ///< Bernoulli arrivals per slot
    std::uint64_t horizon = 1000000;
    SchedulingMode mode = SchedulingMode::centralized;
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;
};

void validate(const DynamicConfig& cfg);

struct DynamicReport {
    std::uint64_t horizon = 0;
    std::uint64_t arrived = 0;
    std::uint64_t completed = 0;
    std::uint64_t shared = 0;
    double average_queue = 0.0;  ///< time-averaged total virtual queue size
    double average_queue_se = 0.0;
    double average_completion = 0.0;  ///< slots from arrival to the whole group holding it
    double average_completion_se = 0.0;
    double sharing_probability = 0.0;  ///< shared / arrived
    Eigen::MatrixXd reciprocity_drift;  ///< H(i,j)/T above the diagonal, -H(i,j)/T below
    double queue_slope = 0.0;           ///< least-squares slope over the second half
    bool stable = true;
    std::size_t final_queue = 0;

    double max_reciprocity_drift() const { return reciprocity_drift.cwiseAbs().maxCoeff(); }
};

/// Slope (packets/slot) above which a run counts as unstable.
inline constexpr double kUnstableSlope = 1e-3;

/// Simulates the horizon; a per-slot CSV trace goes to `trace` when given.
DynamicReport run_dynamic(const DynamicConfig& cfg, std::ostream* trace = nullptr);

struct StabilityPoint {
    double arrival_rate;
    DynamicReport report;
};

struct StabilityEstimate {
    double boundary;  ///< last rate of the stable prefix of the grid; NaN if the first point is unstable
    std::vector<StabilityPoint> points;
};

/// Runs every grid rate (ascending) on its own stream, in parallel.
StabilityEstimate estimate_stability_boundary(const DynamicConfig& base, std::span<const double> grid,
                                              unsigned workers = 0);

}  // namespace eqr
