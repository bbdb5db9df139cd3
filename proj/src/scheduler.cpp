#include "eqrecip/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "eqrecip/parallel.hpp"

namespace eqr {

std::string_view to_string(SchedulingMode m)
{
    switch (m) {
    case SchedulingMode::centralized: return "centralized";
    case SchedulingMode::distributed: return "distributed";
    case SchedulingMode::no_grouping: return "no_grouping";
    }
    return "?";
}

SchedulingMode parse_scheduling_mode(std::string_view name)
{
    for (auto m : {SchedulingMode::centralized, SchedulingMode::distributed, SchedulingMode::no_grouping}) {
        if (to_string(m) == name) {
            return m;
        }
    }
    throw std::invalid_argument("unknown scheduling mode '" + std::string(name) + "'");
}

SchedulerState::SchedulerState(const VirtualNetwork& net)
    : users_(net.users()),
      queues_(net.nodes().size()),
      h_(static_cast<std::size_t>(net.users()) * net.users(), 0)
{
}

std::int64_t SchedulerState::h(int i, int j) const
{
    if (i == j) {
        return 0;
    }
    return i < j ? h_[static_cast<std::size_t>(i) * users_ + j] : -h_[static_cast<std::size_t>(j) * users_ + i];
}

std::uint64_t SchedulerState::add_arrival()
{
    const std::uint64_t id = next_packet_++;
    packets_.emplace(id, PacketRecord{t_, 0});
    queues_[0].push_back(id);
    ++queued_;
    return id;
}

struct SchedulerOps {
    // Sum over pairs a<b of H(a,b) (n(b,a) - n(a,b)) when `sharer` is handed the packet.
    static double reciprocity_term(const SchedulerState& st, int sharer, UserMask off)
    {
        double v = 0.0;
        for (UserMask m = off & ~(UserMask{1} << sharer); m != 0; m &= m - 1) {
            const int j = __builtin_ctz(m);
            v -= static_cast<double>(st.h(sharer, j));
        }
        return v;
    }

    static void count_assignment(SchedulerState& st, int sharer, UserMask off)
    {
        const int n = st.users_;
        for (UserMask m = off & ~(UserMask{1} << sharer); m != 0; m &= m - 1) {
            const int j = __builtin_ctz(m);
            if (sharer < j) {
                ++st.h_[static_cast<std::size_t>(sharer) * n + j];
            } else {
                --st.h_[static_cast<std::size_t>(j) * n + sharer];
            }
        }
    }

    static std::uint64_t pop(SchedulerState& st, int node)
    {
        auto& q = st.queues_[node];
        const std::uint64_t id = q.front();
        q.pop_front();
        --st.queued_;
        return id;
    }

    static void push(SchedulerState& st, const VirtualNetwork& net, int node, std::uint64_t id,
                     StepDecision& d)
    {
        if (node != net.destination()) {
            st.queues_[node].push_back(id);
            ++st.queued_;
            return;
        }
        auto it = st.packets_.find(id);
        if (it->second.holders != full_mask(st.users_)) {
            throw std::logic_error("packet " + std::to_string(id) +
                                   " reached the destination before every user held it");
        }
        d.completion_time = st.t_ - it->second.arrival_slot;
        st.packets_.erase(it);
        ++st.absorbed_;
    }

    static void apply(SchedulerState& st, const VirtualNetwork& net, const ChannelStateVector& s,
                      int link_id, SchedulingMode mode, StepDecision& d)
    {
        const VirtualLink& l = net.links()[link_id];
        const std::uint64_t id = pop(st, l.upstream);
        PacketRecord& rec = st.packets_.at(id);
        switch (l.kind) {
        case LinkKind::arrival_to_status:
        case LinkKind::status_to_status:
            rec.holders |= s.bits();
            break;
        case LinkKind::arrival_to_user:
            rec.holders |= s.bits();
            count_assignment(st, l.user, ~s.bits() & full_mask(st.users_));
            if (mode == SchedulingMode::distributed) {
                st.forced_ = ForcedShare{l.user, id};
            }
            break;
        case LinkKind::user_to_destination:
            rec.holders = full_mask(st.users_);
            ++st.shared_;
            break;
        }
        push(st, net, l.downstream, id, d);
    }

    static StepDecision run(SchedulingMode mode, SchedulerState& st, const VirtualNetwork& net,
                            const ChannelStateVector& s)
    {
        if (s.size() != st.users_) {
            throw std::invalid_argument("channel state length does not match the network");
        }
        ++st.t_;
        StepDecision d;

        if (mode == SchedulingMode::distributed && st.forced_) {
            const ForcedShare f = *st.forced_;
            st.forced_.reset();
            auto& q = st.queues_[net.user_node(f.user)];
            auto it = std::find(q.begin(), q.end(), f.packet);
            if (it == q.end()) {
                throw std::logic_error("forced share of a packet not queued at its user");
            }
            // move the pending packet to the head so apply() pops it
            std::rotate(q.begin(), it, std::next(it));
            d.forced = true;
            d.link = net.find_link(net.user_node(f.user), net.destination());
            apply(st, net, s, d.link, mode, d);
            return d;
        }

        const auto& links = net.links();
        const UserMask off = ~s.bits() & full_mask(st.users_);
        for (int k = 0; k < static_cast<int>(links.size()); ++k) {
            const VirtualLink& l = links[k];
            if (st.queues_[l.upstream].empty() || !l.is_on(s)) {
                continue;
            }
            if (mode == SchedulingMode::no_grouping && l.local_sharing()) {
                continue;
            }
            if (mode == SchedulingMode::distributed && l.kind == LinkKind::user_to_destination) {
                continue;
            }
            const double up = static_cast<double>(st.queues_[l.upstream].size());
            const double down =
                l.downstream == net.destination() ? 0.0 : static_cast<double>(st.queues_[l.downstream].size());
            const double w = std::max(0.0, up - down);
            if (w <= 0.0) {
                continue;
            }
            double value = w;
            if (l.kind == LinkKind::arrival_to_user) {
                if (mode == SchedulingMode::distributed) {
                    value = 0.5 * w;
                }
                value += reciprocity_term(st, l.user, off);
            }
            if (value > d.value) {
                d.value = value;
                d.link = k;
            }
        }
        if (d.link >= 0) {
            apply(st, net, s, d.link, mode, d);
        }
        return d;
    }
};

StepDecision centralized_step(SchedulerState& state, const VirtualNetwork& net, const ChannelStateVector& s)
{
    return SchedulerOps::run(SchedulingMode::centralized, state, net, s);
}

StepDecision distributed_step(SchedulerState& state, const VirtualNetwork& net, const ChannelStateVector& s)
{
    return SchedulerOps::run(SchedulingMode::distributed, state, net, s);
}

StepDecision no_grouping_step(SchedulerState& state, const VirtualNetwork& net, const ChannelStateVector& s)
{
    return SchedulerOps::run(SchedulingMode::no_grouping, state, net, s);
}

StepDecision step(SchedulingMode mode, SchedulerState& state, const VirtualNetwork& net,
                  const ChannelStateVector& s)
{
    return SchedulerOps::run(mode, state, net, s);
}

void validate(const DynamicConfig& cfg)
{
    const int n = static_cast<int>(cfg.channels.size());
    if (n < 2 || n > kMaxVirtualUsers) {
        throw std::invalid_argument("dynamic runs need 2.." + std::to_string(kMaxVirtualUsers) + " users");
    }
    for (const auto& ch : cfg.channels) {
        validate(ch);
    }
    if (!(cfg.arrival_rate >= 0.0 && cfg.arrival_rate <= 1.0)) {
        throw std::invalid_argument("arrival rate must lie in [0, 1]");
    }
    if (cfg.horizon < 1) {
        throw std::invalid_argument("horizon must be at least 1 slot");
    }
}

namespace {

constexpr int kBatches = 20;

double batch_se(const std::vector<double>& means)
{
    const auto b = static_cast<double>(means.size());
    if (means.size() < 2) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double m = 0.0;
    for (double x : means) {
        m += x;
    }
    m /= b;
    double ss = 0.0;
    for (double x : means) {
        ss += (x - m) * (x - m);
    }
    return std::sqrt(ss / (b - 1) / b);
}

}  // namespace

DynamicReport run_dynamic(const DynamicConfig& cfg, std::ostream* trace)
{
    validate(cfg);
    const int n = static_cast<int>(cfg.channels.size());
    const VirtualNetwork net = VirtualNetwork::build(n);
    SchedulerState state(net);
    std::vector<ChannelModel> channels = cfg.channels;
    reset_to_stationary(channels);
    Rng rng(cfg.seed, cfg.stream);

    if (trace) {
        *trace << "t,link,forced,total_queue";
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                *trace << ",H_" << i + 1 << '_' << j + 1;
            }
        }
        *trace << '\n';
    }

    const std::uint64_t T = cfg.horizon;
    const std::uint64_t batch_len = std::max<std::uint64_t>(1, T / kBatches);
    std::vector<double> queue_batches, completion_batches;
    double batch_queue = 0.0, batch_completion = 0.0;
    std::uint64_t batch_slots = 0, batch_done = 0;

    long double queue_sum = 0, completion_sum = 0;
    std::uint64_t completed = 0;
    // least squares of Q(t) on t over the second half
    const std::uint64_t half = T / 2;
    long double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;

    for (std::uint64_t t = 1; t <= T; ++t) {
        const ChannelStateVector s = sample_state(channels, rng);
        const StepDecision d = step(cfg.mode, state, net, s);
        if (d.completion_time) {
            completion_sum += static_cast<long double>(*d.completion_time);
            batch_completion += static_cast<double>(*d.completion_time);
            ++completed;
            ++batch_done;
        }
        if (rng.bernoulli(cfg.arrival_rate)) {
            state.add_arrival();
        }
        if (state.arrived() != state.absorbed() + state.total_queued()) {
            throw std::logic_error("virtual packet conservation violated at slot " + std::to_string(t));
        }

        const auto q = static_cast<double>(state.total_queued());
        queue_sum += q;
        batch_queue += q;
        ++batch_slots;
        if (t > half) {
            const auto x = static_cast<long double>(t);
            sx += x;
            sy += q;
            sxx += x * x;
            sxy += x * q;
            cnt += 1;
        }
        if (batch_slots == batch_len) {
            queue_batches.push_back(batch_queue / static_cast<double>(batch_slots));
            if (batch_done > 0) {
                completion_batches.push_back(batch_completion / static_cast<double>(batch_done));
            }
            batch_queue = batch_completion = 0.0;
            batch_slots = batch_done = 0;
        }

        if (trace) {
            *trace << t << ',' << (d.link < 0 ? std::string("none")
                                              : net.node_name(net.links()[d.link].upstream) + "->" +
                                                    net.node_name(net.links()[d.link].downstream))
                   << ',' << (d.forced ? 1 : 0) << ',' << state.total_queued();
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    *trace << ',' << state.h(i, j);
                }
            }
            *trace << '\n';
        }
    }

    DynamicReport r;
    r.horizon = T;
    r.arrived = state.arrived();
    r.completed = completed;
    r.shared = state.shared();
    r.average_queue = static_cast<double>(queue_sum / T);
    r.average_queue_se = batch_se(queue_batches);
    if (completed > 0) {
        r.average_completion = static_cast<double>(completion_sum / completed);
        r.average_completion_se = batch_se(completion_batches);
    }
    r.sharing_probability =
        r.arrived == 0 ? 0.0 : static_cast<double>(r.shared) / static_cast<double>(r.arrived);
    r.reciprocity_drift = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            r.reciprocity_drift(i, j) = static_cast<double>(state.h(i, j)) / static_cast<double>(T);
        }
    }
    const long double denom = cnt * sxx - sx * sx;
    r.queue_slope = denom > 0 ? static_cast<double>((cnt * sxy - sx * sy) / denom) : 0.0;
    r.stable = r.queue_slope <= kUnstableSlope;
    r.final_queue = state.total_queued();
    return r;
}

StabilityEstimate estimate_stability_boundary(const DynamicConfig& base, std::span<const double> grid,
                                              unsigned workers)
{
    if (!std::is_sorted(grid.begin(), grid.end())) {
        throw std::invalid_argument("arrival-rate grid must be sorted ascending");
    }
    StabilityEstimate out;
    out.points.resize(grid.size());
    parallel_for(
        grid.size(),
        [&](std::size_t k) {
            DynamicConfig cfg = base;
            cfg.arrival_rate = grid[k];
            cfg.stream = base.stream + k;
            out.points[k] = {grid[k], run_dynamic(cfg)};
        },
        workers);
    out.boundary = std::numeric_limits<double>::quiet_NaN();
    for (const auto& p : out.points) {
        if (!p.report.stable) {
            break;
        }
        out.boundary = p.arrival_rate;
    }
    return out;
}

}  // namespace eqr
