#include "eqrecip/mc_sim.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "eqrecip/analytics.hpp"
#include "eqrecip/parallel.hpp"

namespace eqr {

namespace {

constexpr std::uint64_t kChunk = 4096;

int lowest(UserMask m) { return __builtin_ctz(m); }

// Picks the i-th (0-based) set bit of m.
int nth_user(UserMask m, std::uint32_t k)
{
    for (; k > 0; --k) {
        m &= m - 1;
    }
    return lowest(m);
}

struct Simulator {
    const DisseminationConfig& cfg;
    int n;
    UserMask all;
    UserMask group;
    std::vector<double> long_run_error;  // for the pair fallback after a decline

    explicit Simulator(const DisseminationConfig& c)
        : cfg(c), n(c.users()), all(full_mask(c.users())), group(c.group_mask())
    {
        long_run_error.reserve(n);
        for (const auto& ch : cfg.channels) {
            long_run_error.push_back(1.0 - on_probability(ch));
        }
    }

    // Share probability of holder i towards `missing` once some holders have declined:
    // a lone cooperating pair falls back to its two-user optimum, anything larger stops.
    double fallback_share(int i, UserMask missing) const
    {
        if (popcount(missing) != 1) {
            return 0.0;
        }
        const int j = lowest(missing);
        const double pi = long_run_error[i];
        const double pj = long_run_error[j];
        return pi <= pj ? pair_share_probability(pi, pj) : 1.0;
    }

    // Returns the sharer, or -1 for no local broadcast. Holders that decline are excluded.
    int choose_sharer(Rng& rng, UserMask g_hold, UserMask g_miss, UserMask& excluded,
                      bool first_decision) const
    {
        const UserMask coop = g_hold & ~excluded;
        switch (cfg.strategy) {
        case Strategy::no_sharing:
        case Strategy::unicast:
            excluded |= coop;
            return -1;
        case Strategy::always_share:
            return lowest(coop);
        case Strategy::uniform_share:
            return nth_user(coop, rng.below(static_cast<std::uint32_t>(popcount(coop))));
        case Strategy::policy: break;
        }
        const double u = rng.uniform();
        double acc = 0.0;
        for (UserMask m = coop; m != 0; m &= m - 1) {
            const int i = lowest(m);
            acc += first_decision ? cfg.policy->get(i, g_miss) : fallback_share(i, g_miss);
            if (u < acc) {
                return i;
            }
        }
        excluded |= coop;
        return -1;
    }

    void run(std::uint64_t index, TrialOutcome& out) const
    {
        Rng rng(cfg.seed, index);
        std::vector<ChannelModel> channels = cfg.channels;
        reset_to_stationary(channels);

        out.completion_slots = 0;
        out.censored = false;
        out.shares_sent.assign(n, 0);
        out.received_via_d2d.assign(n, 0);
        out.sharer_assignments.assign(n, 0);
        out.deliveries.assign(static_cast<std::size_t>(n) * n, 0);

        const double gamma = cfg.d2d.error_prob;
        UserMask holders = 0;
        UserMask excluded = 0;
        UserMask pending = 0;  // group members still waiting on the local broadcast
        int sharer = -1;
        bool assigned = false;
        std::uint64_t t = 0;

        while (holders != all) {
            if (t == cfg.slot_cap) {
                out.censored = true;
                break;
            }
            ++t;
            const ChannelStateVector state = sample_state(channels, rng);

            if (sharer >= 0) {
                for (UserMask m = pending; m != 0; m &= m - 1) {
                    const int j = lowest(m);
                    if (gamma > 0.0 && rng.bernoulli(gamma)) {
                        continue;
                    }
                    holders |= UserMask{1} << j;
                    pending &= ~(UserMask{1} << j);
                    ++out.deliveries[static_cast<std::size_t>(sharer) * n + j];
                    ++out.received_via_d2d[j];
                }
                if (pending == 0) {
                    sharer = -1;
                }
                continue;
            }

            const UserMask missing = all & ~holders;
            if (cfg.strategy == Strategy::unicast) {
                const UserMask ready = state.bits() & missing;
                if (ready != 0) {
                    holders |= UserMask{1} << lowest(ready);
                }
            } else {
                holders |= state.bits() & missing;
            }

            const UserMask g_hold = holders & group;
            const UserMask g_miss = group & ~holders;
            if (g_hold == 0) {
                continue;
            }
            if (g_miss == 0) {
                // the uniform rule still names a sharer even when nobody needs the packet
                if (cfg.strategy == Strategy::uniform_share && !assigned) {
                    const int i = nth_user(g_hold, rng.below(static_cast<std::uint32_t>(popcount(g_hold))));
                    ++out.sharer_assignments[i];
                    assigned = true;
                }
                continue;
            }
            if ((g_hold & ~excluded) == 0) {
                continue;
            }
            const int chosen = choose_sharer(rng, g_hold, g_miss, excluded, excluded == 0);
            assigned = true;
            if (chosen >= 0) {
                sharer = chosen;
                pending = g_miss;
                ++out.shares_sent[chosen];
                ++out.sharer_assignments[chosen];
            }
        }
        out.completion_slots = t;
    }
};

// Integer sums so chunk results merge exactly regardless of thread count.
struct Accumulator {
    std::uint64_t trials = 0, censored = 0;
    std::uint64_t slots = 0;
    long double slots_sq = 0;
    std::vector<std::uint64_t> shares, received, assignments, deliveries, asym_sq;
    std::uint64_t down = 0, up = 0, down_sq = 0, up_sq = 0, down_up = 0;

    explicit Accumulator(int n)
        : shares(n), received(n), assignments(n), deliveries(static_cast<std::size_t>(n) * n),
          asym_sq(static_cast<std::size_t>(n) * n)
    {
    }

    void add(const TrialOutcome& o, int n, UserMask group)
    {
        ++trials;
        if (o.censored) {
            ++censored;
        } else {
            slots += o.completion_slots;
            slots_sq += static_cast<long double>(o.completion_slots) * o.completion_slots;
        }
        std::uint64_t d = 0, u = 0;
        for (int i = 0; i < n; ++i) {
            shares[i] += o.shares_sent[i];
            received[i] += o.received_via_d2d[i];
            assignments[i] += o.sharer_assignments[i];
            if (has_user(group, i)) {
                d += o.received_via_d2d[i];
                u += o.sharer_assignments[i];
            }
            for (int j = 0; j < n; ++j) {
                const std::size_t ij = static_cast<std::size_t>(i) * n + j;
                deliveries[ij] += o.deliveries[ij];
                if (i < j) {
                    const std::int64_t diff = static_cast<std::int64_t>(o.deliveries[ij]) -
                                              static_cast<std::int64_t>(o.deliveries[static_cast<std::size_t>(j) * n + i]);
                    asym_sq[ij] += static_cast<std::uint64_t>(diff * diff);
                }
            }
        }
        down += d;
        up += u;
        down_sq += d * d;
        up_sq += u * u;
        down_up += d * u;
    }

    void merge(const Accumulator& o)
    {
        trials += o.trials;
        censored += o.censored;
        slots += o.slots;
        slots_sq += o.slots_sq;
        auto sum = [](std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
            for (std::size_t k = 0; k < a.size(); ++k) {
                a[k] += b[k];
            }
        };
        sum(shares, o.shares);
        sum(received, o.received);
        sum(assignments, o.assignments);
        sum(deliveries, o.deliveries);
        sum(asym_sq, o.asym_sq);
        down += o.down;
        up += o.up;
        down_sq += o.down_sq;
        up_sq += o.up_sq;
        down_up += o.down_up;
    }
};

SimulationSummary summarize(const Accumulator& acc, int n)
{
    SimulationSummary s;
    s.trials = acc.trials;
    s.censored = acc.censored;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto done = static_cast<double>(acc.trials - acc.censored);
    if (done > 0) {
        s.mean = static_cast<double>(acc.slots) / done;
        const long double m = static_cast<long double>(acc.slots) / done;
        const long double var = done > 1 ? (acc.slots_sq - done * m * m) / (done - 1) : 0.0L;
        s.std_error = std::sqrt(static_cast<double>(std::max(var, 0.0L)) / done);
    } else {
        s.mean = nan;
        s.std_error = nan;
    }
    const auto t = static_cast<double>(acc.trials);
    s.shares_sent.resize(n);
    s.received_via_d2d.resize(n);
    s.sharer_assignments.resize(n);
    s.deliveries.resize(n, n);
    s.asymmetry_se = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        s.shares_sent(i) = static_cast<double>(acc.shares[i]) / t;
        s.received_via_d2d(i) = static_cast<double>(acc.received[i]) / t;
        s.sharer_assignments(i) = static_cast<double>(acc.assignments[i]) / t;
        for (int j = 0; j < n; ++j) {
            s.deliveries(i, j) = static_cast<double>(acc.deliveries[static_cast<std::size_t>(i) * n + j]) / t;
        }
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double mean_diff = s.deliveries(i, j) - s.deliveries(j, i);
            const double mean_sq = static_cast<double>(acc.asym_sq[static_cast<std::size_t>(i) * n + j]) / t;
            const double var = t > 1 ? (mean_sq - mean_diff * mean_diff) * t / (t - 1) : 0.0;
            s.asymmetry_se(i, j) = s.asymmetry_se(j, i) = std::sqrt(std::max(var, 0.0) / t);
        }
    }
    // ratio of means with a delta-method standard error
    const double md = static_cast<double>(acc.down) / t;
    const double mu = static_cast<double>(acc.up) / t;
    if (mu > 0) {
        const double vd = static_cast<double>(acc.down_sq) / t - md * md;
        const double vu = static_cast<double>(acc.up_sq) / t - mu * mu;
        const double cdu = static_cast<double>(acc.down_up) / t - md * mu;
        const double r = md / mu;
        s.download_upload_ratio = r;
        const double var = (vd - 2 * r * cdu + r * r * vu) / (mu * mu);
        s.download_upload_ratio_se = std::sqrt(std::max(var, 0.0) / t);
    } else {
        s.download_upload_ratio = nan;
        s.download_upload_ratio_se = nan;
    }
    return s;
}

std::string fmt(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), end);
}

}  // namespace

std::string_view to_string(Strategy s)
{
    switch (s) {
    case Strategy::no_sharing: return "no_sharing";
    case Strategy::unicast: return "unicast";
    case Strategy::always_share: return "always_share";
    case Strategy::uniform_share: return "uniform_share";
    case Strategy::policy: return "policy";
    }
    return "?";
}

Strategy parse_strategy(std::string_view name)
{
    for (Strategy s : {Strategy::no_sharing, Strategy::unicast, Strategy::always_share,
                       Strategy::uniform_share, Strategy::policy}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw std::invalid_argument("unknown strategy '" + std::string(name) + "'");
}

void validate(const DisseminationConfig& cfg)
{
    const int n = cfg.users();
    if (n < 1 || n > kMaxUsers) {
        throw std::invalid_argument("user count must be in 1.." + std::to_string(kMaxUsers));
    }
    for (const auto& ch : cfg.channels) {
        validate(ch);
    }
    validate(cfg.d2d);
    if (cfg.d2d.error_prob >= 1.0 && cfg.strategy != Strategy::no_sharing &&
        cfg.strategy != Strategy::unicast) {
        throw std::invalid_argument("local sharing needs a D2D loss probability below 1");
    }
    if ((cfg.group & ~full_mask(n)) != 0) {
        throw std::invalid_argument("group mask names users beyond the channel list");
    }
    if (cfg.strategy == Strategy::policy) {
        if (!cfg.policy) {
            throw std::invalid_argument("strategy 'policy' needs a sharing policy");
        }
        if (cfg.policy->users() != n) {
            throw std::invalid_argument("policy user count does not match the channel list");
        }
    }
    if (cfg.trials == 0) {
        throw std::invalid_argument("trials must be positive");
    }
    if (cfg.slot_cap == 0) {
        throw std::invalid_argument("slot cap must be positive");
    }
}

TrialOutcome run_trial(const DisseminationConfig& cfg, std::uint64_t index)
{
    validate(cfg);
    TrialOutcome out;
    Simulator(cfg).run(index, out);
    return out;
}

SimulationSummary simulate_completion(const DisseminationConfig& cfg)
{
    validate(cfg);
    const int n = cfg.users();
    const UserMask group = cfg.group_mask();
    const Simulator sim(cfg);
    const std::size_t chunks = static_cast<std::size_t>((cfg.trials + kChunk - 1) / kChunk);
    std::vector<Accumulator> parts(chunks, Accumulator(n));
    parallel_for(
        chunks,
        [&](std::size_t c) {
            TrialOutcome o;
            const std::uint64_t begin = c * kChunk;
            const std::uint64_t end = std::min<std::uint64_t>(cfg.trials, begin + kChunk);
            for (std::uint64_t k = begin; k < end; ++k) {
                sim.run(k, o);
                parts[c].add(o, n, group);
            }
        },
        cfg.workers);
    Accumulator total(n);
    for (const auto& p : parts) {
        total.merge(p);
    }
    return summarize(total, n);
}

double ReciprocityMatrix::max_asymmetry_z() const
{
    double z = 0.0;
    for (Eigen::Index i = 0; i < mean.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < mean.cols(); ++j) {
            const double diff = std::abs(mean(i, j) - mean(j, i));
            if (asymmetry_se(i, j) > 0) {
                z = std::max(z, diff / asymmetry_se(i, j));
            } else if (diff > 0) {
                return std::numeric_limits<double>::infinity();
            }
        }
    }
    return z;
}

ReciprocityMatrix measure_reciprocity(const DisseminationConfig& cfg)
{
    const SimulationSummary s = simulate_completion(cfg);
    return {s.deliveries, s.asymmetry_se};
}

std::string summary_csv_header(int users)
{
    std::string h = "policy,parameters,trials,censored,mean_slots,std_error,download_upload_ratio,"
                    "download_upload_ratio_se";
    for (int i = 1; i <= users; ++i) {
        const std::string k = std::to_string(i);
        h += ",shares_" + k + ",received_" + k + ",assignments_" + k;
    }
    for (int i = 1; i <= users; ++i) {
        for (int j = 1; j <= users; ++j) {
            if (i != j) {
                h += ",deliveries_" + std::to_string(i) + "_" + std::to_string(j);
            }
        }
    }
    return h;
}

std::string summary_csv_row(std::string_view policy_name, std::string_view parameters,
                            const SimulationSummary& s)
{
    std::string r;
    r += policy_name;
    r += ',';
    r += '"';
    r += parameters;
    r += '"';
    r += ',' + std::to_string(s.trials) + ',' + std::to_string(s.censored);
    r += ',' + fmt(s.mean) + ',' + fmt(s.std_error) + ',' + fmt(s.download_upload_ratio) + ',' +
         fmt(s.download_upload_ratio_se);
    const auto n = s.shares_sent.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        r += ',' + fmt(s.shares_sent(i)) + ',' + fmt(s.received_via_d2d(i)) + ',' +
             fmt(s.sharer_assignments(i));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i != j) {
                r += ',' + fmt(s.deliveries(i, j));
            }
        }
    }
    return r;
}

}  // namespace eqr
