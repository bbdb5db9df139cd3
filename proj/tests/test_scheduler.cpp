#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "eqrecip/scheduler.hpp"

using namespace eqr;

namespace {

DynamicConfig two_users(double pe, double lambda, SchedulingMode mode, std::uint64_t horizon)
{
    DynamicConfig cfg;
    cfg.channels = iid_channels(std::vector<double>{pe, pe});
    cfg.arrival_rate = lambda;
    cfg.mode = mode;
    cfg.horizon = horizon;
    return cfg;
}

}  // namespace

TEST_CASE("mode names round-trip")
{
    for (auto m : {SchedulingMode::centralized, SchedulingMode::distributed, SchedulingMode::no_grouping}) {
        CHECK(parse_scheduling_mode(to_string(m)) == m);
    }
    CHECK_THROWS_AS(parse_scheduling_mode("greedy"), std::invalid_argument);
}

TEST_CASE("empty queues do nothing")
{
    const auto net = VirtualNetwork::build(3);
    SchedulerState st(net);
    for (auto m : {SchedulingMode::centralized, SchedulingMode::distributed, SchedulingMode::no_grouping}) {
        const auto d = step(m, st, net, ChannelStateVector{1, 1, 1});
        CHECK(d.link == -1);
        CHECK(d.value == 0.0);
        CHECK_FALSE(d.completion_time);
    }
    CHECK(st.slot() == 3);
    CHECK_THROWS_AS(centralized_step(st, net, ChannelStateVector{1, 1}), std::invalid_argument);
}

TEST_CASE("lucky broadcast goes straight to the destination")
{
    const auto net = VirtualNetwork::build(2);
    SchedulerState st(net);
    st.add_arrival();
    const auto d = centralized_step(st, net, ChannelStateVector{1, 1});
    CHECK(d.link == net.find_link(net.arrival(), net.destination()));
    CHECK(d.value == 1.0);
    REQUIRE(d.completion_time);
    CHECK(*d.completion_time == 1);
    CHECK(st.absorbed() == 1);
    CHECK(st.total_queued() == 0);
}

TEST_CASE("hand-off to a user, then a local share")
{
    const auto net = VirtualNetwork::build(2);
    SchedulerState st(net);
    st.add_arrival();
    st.add_arrival();

    // both links out of v_a have weight 2; the retransmission path comes first
    auto d = centralized_step(st, net, ChannelStateVector{1, 0});
    CHECK(d.link == net.find_link(net.arrival(), net.status_node(0b01)));
    CHECK(st.queue_size(net.status_node(0b01)) == 1);

    // v^(1,0) now has backlog, so handing the packet to user 1 is the heavier link
    d = centralized_step(st, net, ChannelStateVector{1, 0});
    CHECK(d.link == net.find_link(net.arrival(), net.user_node(0)));
    CHECK(d.value == 1.0);
    CHECK(st.h(0, 1) == 1);
    CHECK(st.h(1, 0) == -1);
    CHECK(st.packet(1).holders == 0b01);

    // every BS channel is down; only the local share can move anything
    d = centralized_step(st, net, ChannelStateVector{0, 0});
    CHECK(d.link == net.find_link(net.user_node(0), net.destination()));
    REQUIRE(d.completion_time);
    CHECK(*d.completion_time == 3);
    CHECK(st.shared() == 1);
    CHECK(st.queue_size(net.status_node(0b01)) == 1);
}

TEST_CASE("reciprocity counter steers the hand-off")
{
    const auto net = VirtualNetwork::build(2);
    SchedulerState st(net);
    st.add_arrival();
    st.add_arrival();
    centralized_step(st, net, ChannelStateVector{1, 0});
    centralized_step(st, net, ChannelStateVector{1, 0});  // user 1 now owes user 2 a share: H(1,2) = 1
    st.add_arrival();
    st.add_arrival();
    // queues: v_a 2, v^(1,0) 1, v_1 1.  s = (0,1): v_a -> v^(0,1) has weight 2,
    // v_a -> v_2 has weight 2 plus H(1,2) = 1, so user 2 gets the hand-off
    const auto d = centralized_step(st, net, ChannelStateVector{0, 1});
    CHECK(d.link == net.find_link(net.arrival(), net.user_node(1)));
    CHECK(d.value == 3.0);
    CHECK(st.h(0, 1) == 0);
}

TEST_CASE("distributed hand-off forces the share next slot")
{
    const auto net = VirtualNetwork::build(2);
    SchedulerState st(net);
    st.add_arrival();
    st.add_arrival();
    distributed_step(st, net, ChannelStateVector{1, 0});
    auto d = distributed_step(st, net, ChannelStateVector{1, 0});
    CHECK(d.link == net.find_link(net.arrival(), net.user_node(0)));
    CHECK(d.value == 0.5);
    REQUIRE(st.forced_share());
    CHECK(st.forced_share()->user == 0);

    st.add_arrival();
    // even with a good broadcast opportunity the pending share goes first
    d = distributed_step(st, net, ChannelStateVector{1, 1});
    CHECK(d.forced);
    CHECK(d.link == net.find_link(net.user_node(0), net.destination()));
    CHECK(d.completion_time);
    CHECK_FALSE(st.forced_share());
}

TEST_CASE("distributed scheduling never picks a share on its own")
{
    const auto net = VirtualNetwork::build(3);
    SchedulerState st(net);
    Rng rng(3);
    std::vector<ChannelModel> ch = iid_channels(std::vector<double>{0.3, 0.5, 0.6});
    int forced = 0;
    for (int t = 0; t < 20000; ++t) {
        const bool pending = st.forced_share().has_value();
        const auto d = distributed_step(st, net, sample_state(ch, rng));
        CHECK(d.forced == pending);
        if (d.link >= 0 && !d.forced) {
            CHECK(net.links()[d.link].kind != LinkKind::user_to_destination);
        }
        forced += d.forced;
        if (rng.bernoulli(0.3)) {
            st.add_arrival();
        }
    }
    CHECK(forced > 0);
}

TEST_CASE("no grouping never uses local links")
{
    const auto r = run_dynamic(two_users(0.3, 0.3, SchedulingMode::no_grouping, 100000));
    CHECK(r.shared == 0);
    CHECK(r.max_reciprocity_drift() == 0.0);
    CHECK(r.completed > 0);
}

TEST_CASE("no arrivals, no activity")
{
    for (auto m : {SchedulingMode::centralized, SchedulingMode::distributed, SchedulingMode::no_grouping}) {
        const auto r = run_dynamic(two_users(0.5, 0.0, m, 10000));
        CHECK(r.arrived == 0);
        CHECK(r.completed == 0);
        CHECK(r.average_queue == 0.0);
        CHECK(r.average_completion == 0.0);
        CHECK(r.queue_slope == 0.0);
        CHECK(r.stable);
    }
}

TEST_CASE("perfect channels deliver every packet one slot after arrival")
{
    DynamicConfig cfg = two_users(0.0, 0.5, SchedulingMode::centralized, 10000);
    const auto r = run_dynamic(cfg);
    CHECK(r.average_completion == 1.0);
    CHECK(r.shared == 0);
    CHECK(r.completed + r.final_queue == r.arrived);
}

TEST_CASE("packets are conserved")
{
    for (auto m : {SchedulingMode::centralized, SchedulingMode::distributed, SchedulingMode::no_grouping}) {
        DynamicConfig cfg;
        cfg.channels = iid_channels(std::vector<double>{0.2, 0.4, 0.6});
        cfg.arrival_rate = 0.25;
        cfg.mode = m;
        cfg.horizon = 50000;
        const auto r = run_dynamic(cfg);
        CHECK(r.completed + r.final_queue == r.arrived);
        CHECK(r.arrived > 0);
    }
}

TEST_CASE("trace output")
{
    std::ostringstream os;
    DynamicConfig cfg;
    cfg.channels = iid_channels(std::vector<double>{0.5, 0.5, 0.5});
    cfg.arrival_rate = 0.5;
    cfg.horizon = 5;
    run_dynamic(cfg, &os);
    const std::string text = os.str();
    CHECK(text.rfind("t,link,forced,total_queue,H_1_2,H_1_3,H_2_3\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 6);
    CHECK(text.find("\n1,none,0,") != std::string::npos);  // nothing queued before the first arrival

    std::ostringstream again;
    run_dynamic(cfg, &again);
    CHECK(again.str() == text);
}

TEST_CASE("stability verdicts")
{
    CHECK(run_dynamic(two_users(0.5, 0.45, SchedulingMode::distributed, 1000000)).stable);
    CHECK(run_dynamic(two_users(0.5, 0.55, SchedulingMode::centralized, 1000000)).stable);
    CHECK_FALSE(run_dynamic(two_users(0.5, 0.7, SchedulingMode::centralized, 1000000)).stable);
    // retransmissions alone: each user absorbs at most 1 - p = 0.5 packets per slot
    CHECK(run_dynamic(two_users(0.5, 0.45, SchedulingMode::no_grouping, 1000000)).stable);
    CHECK_FALSE(run_dynamic(two_users(0.5, 0.55, SchedulingMode::no_grouping, 1000000)).stable);
}

TEST_CASE("stability boundary is the stable prefix")
{
    const std::vector<double> grid = {0.3, 0.4, 0.7, 0.5};
    CHECK_THROWS_AS(estimate_stability_boundary(two_users(0.5, 0, SchedulingMode::centralized, 1000), grid),
                    std::invalid_argument);
    const std::vector<double> sorted = {0.2, 0.4, 0.6, 0.8, 0.9};
    const auto e = estimate_stability_boundary(two_users(0.5, 0, SchedulingMode::distributed, 200000), sorted);
    REQUIRE(e.points.size() == 5);
    CHECK(e.boundary == 0.4);
    CHECK(e.points[0].report.stable);
    CHECK_FALSE(e.points[2].report.stable);

    const std::vector<double> hopeless = {0.95};
    CHECK(std::isnan(
        estimate_stability_boundary(two_users(0.5, 0, SchedulingMode::distributed, 100000), hopeless).boundary));
}

TEST_CASE("sharing grows with load and reciprocity holds on average")
{
    double previous = -1.0;
    for (double lambda : {0.1, 0.3, 0.5}) {
        DynamicConfig cfg;
        cfg.channels = iid_channels(std::vector<double>{0.5, 0.5, 0.5});
        cfg.arrival_rate = lambda;
        cfg.horizon = 200000;
        const auto r = run_dynamic(cfg);
        CHECK(r.stable);
        CHECK(r.sharing_probability >= previous - 0.01);
        previous = r.sharing_probability;
        CHECK(r.max_reciprocity_drift() < 1e-3);
        CHECK(r.reciprocity_drift(0, 1) == -r.reciprocity_drift(1, 0));
    }
}

TEST_CASE("dynamic config errors")
{
    DynamicConfig cfg;
    cfg.channels = iid_channels(std::vector<double>{0.5});
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg.channels = iid_channels(std::vector<double>{0.5, 0.5});
    cfg.arrival_rate = 1.5;
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg.arrival_rate = 0.5;
    cfg.horizon = 0;
    CHECK_THROWS_AS(run_dynamic(cfg), std::invalid_argument);
}
