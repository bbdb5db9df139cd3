// Runs the ten acceptance criteria and prints one PASS/FAIL line each.
// Exits 1 if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "eqrecip/analytics.hpp"
#include "eqrecip/mc_sim.hpp"
#include "eqrecip/parallel.hpp"
#include "eqrecip/scheduler.hpp"
#include "eqrecip/three_user.hpp"
#include "experiments.hpp"

using namespace eqr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string config_path(const char* name) { return std::string(EQRECIP_CONFIG_DIR) + "/" + name; }

// Collects failed sub-checks so each criterion prints a single line.
struct Verdict {
    std::vector<std::string> failures;
    std::ostringstream info;

    void check(bool ok, const std::string& what)
    {
        if (!ok) {
            failures.push_back(what);
        }
    }
    bool passed() const { return failures.empty(); }
};

SimulationSummary sim(std::vector<ChannelModel> channels, Strategy s, std::uint64_t trials, std::uint64_t seed,
                      std::optional<SharingPolicy> policy = {}, double gamma = 0.0)
{
    DisseminationConfig cfg;
    cfg.channels = std::move(channels);
    cfg.strategy = s;
    cfg.policy = std::move(policy);
    cfg.d2d.error_prob = gamma;
    cfg.trials = trials;
    cfg.seed = seed;
    return simulate_completion(cfg);
}

std::vector<ChannelModel> same(double pe, int n)
{
    return iid_channels(std::vector<double>(static_cast<std::size_t>(n), pe));
}

std::vector<ChannelModel> pair(double a, double b) { return iid_channels(std::vector<double>{a, b}); }

std::string num(double v)
{
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// 1 ---------------------------------------------------------------------------
void identify_ratio(Verdict& v)
{
    const auto start = Clock::now();
    v.check(std::abs(improvement_ratio_identify(0.0) - 2.0) <= 1e-12, "R(0) != 2");
    v.check(std::abs(improvement_ratio_identify(0.5) - 1.25) <= 1e-12, "R(0.5) != 1.25");
    std::vector<double> r;
    for (int k = 0; k <= 99; ++k) {
        r.push_back(improvement_ratio_identify(k / 100.0));
    }
    for (std::size_t k = 1; k < r.size(); ++k) {
        v.check(r[k] < r[k - 1], "not decreasing at p=" + num(k / 100.0));
        if (k + 1 < r.size()) {
            v.check(r[k + 1] - 2 * r[k] + r[k - 1] >= -1e-12, "not convex at p=" + num(k / 100.0));
        }
    }
    const double t = seconds_since(start);
    v.check(t < 1.0, "runtime " + num(t) + " s");
    v.info << "R(0)=" << r[0] << " R(0.5)=" << r[50];
}

// 2 ---------------------------------------------------------------------------
void social_ratio(Verdict& v)
{
    const double mid = t_eq_two_symmetric(0.5) / t_union_two_symmetric(0.5);
    const double edge = t_eq_two_symmetric(0.999) / t_union_two_symmetric(0.999);
    v.check(std::abs(mid - 4.0 / 3) <= 1e-12, "ratio at 0.5 = " + num(mid));
    v.check(std::abs(edge - 3.0) <= 0.01, "ratio at 0.999 = " + num(edge));
    v.info << "ratio(0.5)=" << num(mid) << " ratio(0.999)=" << num(edge);
}

// 3 ---------------------------------------------------------------------------
void n_user_union(Verdict& v)
{
    for (int n = 1; n <= 20; ++n) {
        v.check(std::abs(t_union_n_symmetric(0.5, n) - 2.0) <= 1e-12, "T(0.5, " + std::to_string(n) + ") != 2");
    }
    for (int n = 2; n <= 20; ++n) {
        v.check(t_union_n_symmetric(0.2, n) > t_union_n_symmetric(0.2, n - 1), "p=0.2 not increasing at N=" +
                                                                                  std::to_string(n));
        v.check(t_union_n_symmetric(0.8, n) < t_union_n_symmetric(0.8, n - 1), "p=0.8 not decreasing at N=" +
                                                                                  std::to_string(n));
    }
    const double lo = t_union_n_symmetric(0.2, 50);
    const double hi = t_union_n_symmetric(0.8, 50);
    v.check(std::abs(lo - 2.0) <= 0.02, "p=0.2, N=50: " + num(lo));
    v.check(std::abs(hi - 2.0) <= 0.02, "p=0.8, N=50: " + num(hi));
    v.info << "N=50: " << num(lo) << " / " << num(hi);
}

// 4 ---------------------------------------------------------------------------
struct OracleCase {
    std::string name;
    double expected;
    std::function<SimulationSummary(std::uint64_t trials, std::uint64_t seed)> run;
};

std::vector<OracleCase> oracle_cases()
{
    std::vector<OracleCase> c;
    auto iid = [](std::string name, double expected, std::vector<ChannelModel> ch, Strategy s,
                  std::optional<SharingPolicy> pol = {}, double gamma = 0.0) {
        return OracleCase{std::move(name), expected, [=](std::uint64_t n, std::uint64_t seed) {
                              return sim(ch, s, n, seed, pol, gamma);
                          }};
    };
    c.push_back(iid("T_eq p=0.5", t_eq_two_symmetric(0.5), same(0.5, 2), Strategy::no_sharing));
    c.push_back(iid("T_eq p=0.9", t_eq_two_symmetric(0.9), same(0.9, 2), Strategy::no_sharing));
    c.push_back(iid("T_neq p=0.5", t_neq_two_symmetric(0.5), same(0.5, 2), Strategy::unicast));
    c.push_back(iid("T_neq p=0.2", t_neq_two_symmetric(0.2), same(0.2, 2), Strategy::unicast));
    c.push_back(iid("T_union p=0.5", t_union_two_symmetric(0.5), same(0.5, 2), Strategy::always_share));
    c.push_back(iid("T_union p=0.3", t_union_two_symmetric(0.3), same(0.3, 2), Strategy::always_share));
    c.push_back(iid("T_eq N=4 p=0.5", t_eq_n_symmetric(0.5, 4), same(0.5, 4), Strategy::no_sharing));
    c.push_back(iid("T_eq N=3 p=0.7", t_eq_n_symmetric(0.7, 3), same(0.7, 3), Strategy::no_sharing));
    c.push_back(iid("T_eq N=6 p=0.3", t_eq_n_symmetric(0.3, 6), same(0.3, 6), Strategy::no_sharing));
    c.push_back(iid("T_union N=2 p=0.3", t_union_n_symmetric(0.3, 2), same(0.3, 2), Strategy::uniform_share));
    c.push_back(iid("T_union N=5 p=0.5", t_union_n_symmetric(0.5, 5), same(0.5, 5), Strategy::uniform_share));
    c.push_back(iid("T_union N=8 p=0.8", t_union_n_symmetric(0.8, 8), same(0.8, 8), Strategy::uniform_share));

    const auto a24 = asym_two_user(0.2, 0.4);
    c.push_back(iid("T_eq (0.2,0.4)", a24.times.t_eq, pair(0.2, 0.4), Strategy::no_sharing));
    c.push_back(iid("T_full (0.2,0.4)", a24.times.t_full, pair(0.2, 0.4), Strategy::always_share));
    c.push_back(iid("T*_union (0.2,0.4)", a24.times.t_union, pair(0.2, 0.4), Strategy::policy,
                    pair_optimum_policy(0.2, 0.4)));
    c.push_back(iid("T*_union (0.1,0.7)", asym_two_user(0.1, 0.7).times.t_union, pair(0.1, 0.7), Strategy::policy,
                    pair_optimum_policy(0.1, 0.7)));
    const auto a36 = asym_two_user(0.3, 0.6);
    c.push_back(iid("T_eq (0.3,0.6)", a36.times.t_eq, pair(0.3, 0.6), Strategy::no_sharing));
    c.push_back(iid("T_full (0.3,0.6)", a36.times.t_full, pair(0.3, 0.6), Strategy::always_share));

    auto markov = [](double z01, double z10) {
        const MarkovChannel ch{z01, z10, std::nullopt};
        return std::vector<ChannelModel>{ch, ch};
    };
    c.push_back(iid("markov T_eq (0.5,0.5)", markov_two_symmetric(0.5, 0.5).t_eq, markov(0.5, 0.5),
                    Strategy::no_sharing));
    c.push_back(iid("markov T_union (0.5,0.5)", markov_two_symmetric(0.5, 0.5).t_union, markov(0.5, 0.5),
                    Strategy::always_share));
    c.push_back(iid("markov T_eq (0.3,0.7)", markov_two_symmetric(0.3, 0.7).t_eq, markov(0.3, 0.7),
                    Strategy::no_sharing));
    c.push_back(iid("markov T_union (0.8,0.2)", markov_two_symmetric(0.8, 0.2).t_union, markov(0.8, 0.2),
                    Strategy::always_share));

    for (auto [pe, gamma] : {std::pair{0.5, 0.25}, std::pair{0.6, 0.3}, std::pair{0.3, 0.5}}) {
        const auto l = unreliable_local_two_symmetric(pe, gamma);
        SharingPolicy pol(2);
        pol.set(0, 0b10, l.p_star);
        pol.set(1, 0b01, l.p_star);
        c.push_back(iid("lossy T_union p=" + num(pe) + " gamma=" + num(gamma), l.t_union, same(pe, 2),
                        Strategy::policy, pol, gamma));
    }
    return c;
}

void oracle_agreement(Verdict& v)
{
    const auto start = Clock::now();
    const auto cases = oracle_cases();
    v.check(cases.size() == 25, "expected 25 pairs, have " + std::to_string(cases.size()));
    double worst = 0.0;
    std::uint64_t seed = 1000;
    for (const auto& c : cases) {
        const auto s = c.run(1000000, ++seed);
        const double z = std::abs(s.mean - c.expected) / s.std_error;
        worst = std::max(worst, z);
        v.check(z < 3.0 && s.censored == 0, c.name + ": z=" + num(z));
    }
    const double t = seconds_since(start);
    v.check(t < 120.0, "runtime " + num(t) + " s");
    v.info << cases.size() << " pairs, max z=" << num(worst) << ", " << num(t) << " s";
}

// 5 ---------------------------------------------------------------------------
void three_user_lp(Verdict& v)
{
    const auto sym = optimal_three_user(Eigen::Vector3d(0.5, 0.5, 0.5));
    v.check(std::abs(sym.solution.value - 2.0) <= 1e-9, "symmetric optimum " + num(sym.solution.value));

    const Eigen::Vector3d pe(0.2, 0.4, 0.6);
    const auto o = optimal_three_user(pe);
    const double res = reciprocity_residuals(pe, o.solution.x).cwiseAbs().maxCoeff();
    v.check(res < 1e-9, "residual " + num(res));
    const auto s = sim(iid_channels(std::vector<double>{0.2, 0.4, 0.6}), Strategy::policy, 1000000, 51, o.policy);
    const double z = std::abs(s.mean - o.solution.value) / s.std_error;
    v.check(z < 3.0, "simulated " + num(s.mean) + " vs " + num(o.solution.value));

    Rng rng(52);
    int violations = 0;
    double worst_res = 0.0;
    for (int k = 0; k < 200; ++k) {
        Eigen::Vector3d p(rng.uniform() * 0.95, rng.uniform() * 0.95, rng.uniform() * 0.95);
        std::sort(p.data(), p.data() + 3);
        const auto r = optimal_three_user(p);
        worst_res = std::max(worst_res, reciprocity_residuals(p, r.solution.x).cwiseAbs().maxCoeff());
        if (!(t_full_asymmetric(p) <= r.solution.value + 1e-9 && r.solution.value <= t_eq_asymmetric(p) + 1e-9)) {
            ++violations;
        }
    }
    v.check(violations == 0, std::to_string(violations) + " sandwich violations");
    v.check(worst_res < 1e-9, "random-triple residual " + num(worst_res));
    v.info << "T*(0.2,0.4,0.6)=" << num(o.solution.value) << " sim " << num(s.mean) << " (z=" << num(z) << ")";
}

// 6 ---------------------------------------------------------------------------
void grouping(Verdict& v)
{
    const auto cfg = tools::load_config(config_path("grouping.yaml"));
    double lowest = 1e300;
    for (const auto& t : cfg.points) {
        const auto g = grouping_compare(Eigen::Vector3d(t[0], t[1], t[2]));
        lowest = std::min(lowest, g.ratio);
        v.check(g.ratio >= 1 - 1e-9, "ratio " + num(g.ratio) + " at (" + num(t[0]) + "," + num(t[1]) + "," +
                                         num(t[2]) + ")");
    }
    v.check(cfg.points.size() == 125, "grid has " + std::to_string(cfg.points.size()) + " triples");
    v.info << cfg.points.size() << " triples, min ratio " << num(lowest);
}

// 7 ---------------------------------------------------------------------------
void runtime_reciprocity(Verdict& v)
{
    DynamicConfig dyn;
    dyn.channels = iid_channels(std::vector<double>{0.2, 0.4, 0.6});
    dyn.arrival_rate = 0.6;
    dyn.horizon = 1000000;
    dyn.seed = 71;
    const auto r = run_dynamic(dyn);
    v.check(r.max_reciprocity_drift() < 0.01, "max |H|/T = " + num(r.max_reciprocity_drift()));

    struct Named {
        std::string name;
        DisseminationConfig cfg;
    };
    std::vector<Named> policies;
    auto add = [&](std::string name, std::vector<ChannelModel> ch, Strategy s, std::optional<SharingPolicy> pol = {}) {
        DisseminationConfig c;
        c.channels = std::move(ch);
        c.strategy = s;
        c.policy = std::move(pol);
        c.trials = 1000000;
        c.seed = 72 + policies.size();
        policies.push_back({std::move(name), std::move(c)});
    };
    add("full cooperation N=2", same(0.5, 2), Strategy::always_share);
    add("uniform N=3", same(0.5, 3), Strategy::uniform_share);
    add("uniform N=4", same(0.3, 4), Strategy::uniform_share);
    for (auto [a, b] : {std::pair{0.2, 0.4}, std::pair{0.1, 0.7}, std::pair{0.3, 0.6}}) {
        add("pair optimum (" + num(a) + "," + num(b) + ")", pair(a, b), Strategy::policy, pair_optimum_policy(a, b));
    }
    for (const Eigen::Vector3d& pe : {Eigen::Vector3d(0.2, 0.4, 0.6), Eigen::Vector3d(0.1, 0.3, 0.8)}) {
        add("LP optimum (" + num(pe(0)) + "," + num(pe(1)) + "," + num(pe(2)) + ")",
            iid_channels(std::vector<double>{pe(0), pe(1), pe(2)}), Strategy::policy, optimal_three_user(pe).policy);
    }
    double worst = 0.0;
    for (const auto& p : policies) {
        const double z = measure_reciprocity(p.cfg).max_asymmetry_z();
        worst = std::max(worst, z);
        v.check(z < 3.0, p.name + ": z=" + num(z));
    }
    v.info << "max |H|/T=" << num(r.max_reciprocity_drift()) << ", " << policies.size()
           << " policies, max asymmetry z=" << num(worst);
}

// 8 ---------------------------------------------------------------------------
// Walks an ascending grid in small parallel chunks and stops after the first unstable point.
double boundary(double pe, SchedulingMode mode, const std::vector<double>& grid, std::uint64_t seed)
{
    DynamicConfig base;
    base.channels = same(pe, 2);
    base.mode = mode;
    base.horizon = 1000000;
    base.seed = seed;
    double last = std::numeric_limits<double>::quiet_NaN();
    const std::size_t chunk = std::max<unsigned>(2, default_workers());
    for (std::size_t from = 0; from < grid.size(); from += chunk) {
        const std::size_t to = std::min(grid.size(), from + chunk);
        base.stream = from;
        const std::vector<double> part(grid.begin() + from, grid.begin() + to);
        const auto e = estimate_stability_boundary(base, part);
        if (!std::isnan(e.boundary)) {
            last = e.boundary;
        }
        if (std::isnan(e.boundary) || e.boundary != part.back()) {
            break;
        }
    }
    return last;
}

void stability(Verdict& v)
{
    const auto cfg = tools::load_config(config_path("stability-sweep.yaml"));
    DynamicConfig base;
    base.channels = iid_channels(cfg.error_probs);
    base.horizon = cfg.horizon;
    base.seed = cfg.seed;
    base.mode = SchedulingMode::centralized;
    const double central = estimate_stability_boundary(base, cfg.arrival_rates).boundary;
    base.mode = SchedulingMode::distributed;
    base.stream = 1000003;
    const double distributed = estimate_stability_boundary(base, cfg.arrival_rates).boundary;
    v.check(std::abs(central - 0.75) <= 0.05, "centralized boundary " + num(central) + " (target 0.75 +- 0.05)");
    v.check(std::abs(distributed - 0.5) <= 0.05, "distributed boundary " + num(distributed) + " (target 0.5 +- 0.05)");
    v.info << "p=0.5: centralized " << num(central) << ", distributed " << num(distributed) << "; ratios";

    std::vector<double> grid;
    for (int k = 20; k <= 100; ++k) {
        grid.push_back(k / 100.0);
    }
    for (double pe : {0.3, 0.5, 0.7}) {
        const double c = boundary(pe, SchedulingMode::centralized, grid, 81);
        const double d = boundary(pe, SchedulingMode::distributed, grid, 82);
        const double ratio = c / d;
        const double target = stability_bounds_two_symmetric(pe).ratio;
        v.check(std::abs(ratio - target) <= 0.1, "ratio at p=" + num(pe) + ": " + num(c) + "/" + num(d) + " = " +
                                                     num(ratio) + " (target " + num(target) + ")");
        v.info << " p=" << pe << ": " << num(c) << "/" << num(d) << "=" << num(ratio);
    }
}

// 9 ---------------------------------------------------------------------------
void dynamic_ordering(Verdict& v)
{
    const auto cfg = tools::load_config(config_path("dynamic.yaml"));
    v.check(cfg.arrival_rates.size() == 10, "grid has " + std::to_string(cfg.arrival_rates.size()) + " points");
    std::vector<std::vector<StabilityPoint>> runs;
    for (SchedulingMode m : {SchedulingMode::centralized, SchedulingMode::distributed, SchedulingMode::no_grouping}) {
        DynamicConfig base;
        base.channels = iid_channels(cfg.error_probs);
        base.horizon = cfg.horizon;
        base.seed = cfg.seed;
        base.mode = m;
        base.stream = static_cast<std::uint64_t>(m) * 1000003ULL;
        runs.push_back(estimate_stability_boundary(base, cfg.arrival_rates).points);
    }
    auto le = [](double a, double a_se, double b, double b_se) { return a <= b + 3 * std::hypot(a_se, b_se); };
    for (std::size_t k = 0; k < cfg.arrival_rates.size(); ++k) {
        const auto& c = runs[0][k].report;
        const auto& d = runs[1][k].report;
        const auto& g = runs[2][k].report;
        const std::string at = " at lambda=" + num(cfg.arrival_rates[k]);
        v.check(g.stable, "no-grouping unstable" + at);
        v.check(le(c.average_queue, c.average_queue_se, d.average_queue, d.average_queue_se),
                "queue centralized " + num(c.average_queue) + " > distributed " + num(d.average_queue) + at);
        v.check(le(d.average_queue, d.average_queue_se, g.average_queue, g.average_queue_se),
                "queue distributed " + num(d.average_queue) + " > no-grouping " + num(g.average_queue) + at);
        v.check(le(c.average_completion, c.average_completion_se, d.average_completion, d.average_completion_se),
                "completion centralized " + num(c.average_completion) + " > distributed " +
                    num(d.average_completion) + at);
        v.check(le(d.average_completion, d.average_completion_se, g.average_completion, g.average_completion_se),
                "completion distributed " + num(d.average_completion) + " > no-grouping " +
                    num(g.average_completion) + at);
        if (k > 0) {
            v.check(c.sharing_probability >= runs[0][k - 1].report.sharing_probability,
                    "centralized sharing probability falls" + at);
        }
    }
    const auto& top = runs[0].back().report;
    v.info << "lambda=" << num(cfg.arrival_rates.back()) << ": queue " << num(top.average_queue) << "/"
           << num(runs[1].back().report.average_queue) << "/" << num(runs[2].back().report.average_queue)
           << ", sharing " << num(runs[0].front().report.sharing_probability) << " -> "
           << num(top.sharing_probability);
}

// 10 --------------------------------------------------------------------------
void utility(Verdict& v)
{
    const auto cfg = tools::load_config(config_path("utility.yaml"));
    double worst = 0.0;
    std::uint64_t seed = 100;
    for (double pe : cfg.error_probs) {
        double previous = 0.0;
        for (int n : cfg.users) {
            const auto u = utility_n_symmetric(pe, n);
            const double ratio = u.download / u.upload;
            const auto s = sim(same(pe, n), Strategy::uniform_share, cfg.trials, ++seed);
            const double z = std::abs(s.download_upload_ratio - ratio) / s.download_upload_ratio_se;
            worst = std::max(worst, z);
            const std::string at = " at p=" + num(pe) + " N=" + std::to_string(n);
            v.check(z < 3.0, "D/U " + num(s.download_upload_ratio) + " vs " + num(ratio) + at);
            v.check(ratio > previous, "D/U not increasing" + at);
            if (pe == 0.5 && n >= 3) {
                v.check(ratio > 1.0, "D/U <= 1" + at);
            }
            previous = ratio;
        }
    }
    const auto three = utility_n_symmetric(0.5, 3);
    v.check(std::abs(three.download / three.upload - 9.0 / 7) <= 1e-12, "D/U(0.5, 3) != 9/7");
    v.info << "p x N = " << cfg.error_probs.size() << " x " << cfg.users.size() << ", max z=" << num(worst)
           << ", D/U(0.5,3)=" << num(three.download / three.upload);
}

}  // namespace

int main()
{
    struct Criterion {
        int id;
        const char* title;
        void (*run)(Verdict&);
    };
    const Criterion all[] = {
        {1, "identification ratio", identify_ratio},
        {2, "two-user social ratio", social_ratio},
        {3, "N-user union time", n_user_union},
        {4, "oracle agreement", oracle_agreement},
        {5, "three-user LP", three_user_lp},
        {6, "grouping", grouping},
        {7, "equal reciprocity", runtime_reciprocity},
        {8, "stability regions", stability},
        {9, "scheduler ordering", dynamic_ordering},
        {10, "utility", utility},
    };
    int failed = 0;
    for (const auto& c : all) {
        Verdict v;
        const auto start = Clock::now();
        try {
            c.run(v);
        } catch (const std::exception& e) {
            v.check(false, std::string("exception: ") + e.what());
        }
        std::printf("[%s] %2d %s (%.1f s): %s", v.passed() ? "PASS" : "FAIL", c.id, c.title, seconds_since(start),
                    v.info.str().c_str());
        for (const auto& f : v.failures) {
            std::printf("; %s", f.c_str());
        }
        std::printf("\n");
        std::fflush(stdout);
        failed += v.passed() ? 0 : 1;
    }
    std::printf("%d of 10 criteria passed\n", 10 - failed);
    return failed == 0 ? 0 : 1;
}
