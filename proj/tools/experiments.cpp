#include "experiments.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "eqrecip/analytics.hpp"
#include "eqrecip/mc_sim.hpp"
#include "eqrecip/parallel.hpp"
#include "eqrecip/policy.hpp"

#ifndef EQRECIP_VERSION
#define EQRECIP_VERSION "0.0.0"
#endif

namespace eqr::tools {

namespace {

constexpr std::array<std::string_view, 10> kKindNames = {
    "ratios", "n-symmetric-sweep", "asym-two-user", "lp-three-user", "grouping",
    "dynamic", "stability-sweep", "utility", "markov", "lossy-d2d",
};

// ---------------------------------------------------------------------------
// YAML reading with file:line diagnostics

class Reader {
public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const YAML::Node& node, const std::string& path, const std::string& msg) const
    {
        std::string where = source_;
        const YAML::Mark m = node.Mark();
        if (m.line >= 0) {
            where += ":" + std::to_string(m.line + 1);
        }
        throw ConfigError(where + ": " + path + ": " + msg);
    }

    double number(const YAML::Node& node, const std::string& path) const
    {
        if (!node.IsScalar()) {
            fail(node, path, "expected a number");
        }
        try {
            return node.as<double>();
        } catch (const YAML::Exception&) {
            fail(node, path, "expected a number, got '" + node.Scalar() + "'");
        }
    }

    std::uint64_t count(const YAML::Node& node, const std::string& path, std::uint64_t min) const
    {
        const double v = number(node, path);
        if (!(v >= static_cast<double>(min)) || v != std::floor(v) || v > 9.0e15) {
            fail(node, path, "expected an integer >= " + std::to_string(min));
        }
        return static_cast<std::uint64_t>(v);
    }

    double probability(const YAML::Node& node, const std::string& path, bool allow_one) const
    {
        const double v = number(node, path);
        if (!(v >= 0.0 && (allow_one ? v <= 1.0 : v < 1.0))) {
            fail(node, path, std::string("probability must lie in [0, 1") + (allow_one ? "]" : ")") +
                                 ", got " + node.Scalar());
        }
        return v;
    }

    // A list of numbers, or {from, to, step}.
    std::vector<double> grid(const YAML::Node& node, const std::string& path) const
    {
        std::vector<double> out;
        if (node.IsSequence()) {
            for (std::size_t k = 0; k < node.size(); ++k) {
                out.push_back(number(node[k], path + "[" + std::to_string(k) + "]"));
            }
        } else if (node.IsMap()) {
            for (const char* key : {"from", "to", "step"}) {
                if (!node[key]) {
                    fail(node, path, std::string("range needs '") + key + "'");
                }
            }
            const double from = number(node["from"], path + ".from");
            const double to = number(node["to"], path + ".to");
            const double step = number(node["step"], path + ".step");
            if (!(step > 0.0) || to < from) {
                fail(node, path, "range needs step > 0 and to >= from");
            }
            const auto n = static_cast<long>(std::floor((to - from) / step + 1e-9));
            if (n > 100000) {
                fail(node, path, "range has too many points");
            }
            for (long k = 0; k <= n; ++k) {
                // snap to 12 decimals so 0.1*3 prints as 0.3
                out.push_back(std::round((from + static_cast<double>(k) * step) * 1e12) / 1e12);
            }
        } else if (node.IsScalar()) {
            out.push_back(number(node, path));
        } else {
            fail(node, path, "expected a number, a list or a {from, to, step} range");
        }
        if (out.empty()) {
            fail(node, path, "must not be empty");
        }
        return out;
    }

    std::vector<double> probabilities(const YAML::Node& node, const std::string& path, bool allow_one) const
    {
        std::vector<double> v = grid(node, path);
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (!(v[k] >= 0.0 && (allow_one ? v[k] <= 1.0 : v[k] < 1.0))) {
                const YAML::Node item = node.IsSequence() ? node[k] : node;
                fail(item, path + "[" + std::to_string(k) + "]",
                     std::string("probability must lie in [0, 1") + (allow_one ? "]" : ")"));
            }
        }
        return v;
    }

    std::vector<int> int_range(const YAML::Node& node, const std::string& path, int lo, int hi) const
    {
        std::vector<int> out;
        for (double v : grid(node, path)) {
            if (v != std::floor(v) || v < lo || v > hi) {
                fail(node, path, "values must be integers in " + std::to_string(lo) + ".." + std::to_string(hi));
            }
            out.push_back(static_cast<int>(v));
        }
        return out;
    }

    std::vector<std::vector<double>> tuples(const YAML::Node& node, const std::string& path, std::size_t arity,
                                            bool sorted, bool allow_one = false) const
    {
        if (!node.IsSequence() || node.size() == 0) {
            fail(node, path, "expected a non-empty list of " + std::to_string(arity) + "-element lists");
        }
        std::vector<std::vector<double>> out;
        for (std::size_t k = 0; k < node.size(); ++k) {
            const std::string p = path + "[" + std::to_string(k) + "]";
            const YAML::Node item = node[k];
            if (!item.IsSequence() || item.size() != arity) {
                fail(item, p, "expected " + std::to_string(arity) + " numbers");
            }
            std::vector<double> t;
            for (std::size_t i = 0; i < arity; ++i) {
                t.push_back(probability(item[i], p + "[" + std::to_string(i) + "]", allow_one));
            }
            if (sorted && !std::is_sorted(t.begin(), t.end())) {
                fail(item, p, "error probabilities must be sorted ascending (p_e1 <= p_e2 <= ...)");
            }
            out.push_back(std::move(t));
        }
        return out;
    }

private:
    std::string source_;
};

const std::map<ExperimentKind, std::set<std::string>>& kind_keys()
{
    static const std::map<ExperimentKind, std::set<std::string>> keys = {
        {ExperimentKind::ratios, {"error_probs"}},
        {ExperimentKind::n_symmetric_sweep, {"error_probs", "users"}},
        {ExperimentKind::asym_two_user, {"pairs"}},
        {ExperimentKind::lp_three_user, {"triples", "reciprocity_form"}},
        {ExperimentKind::grouping, {"triples", "grid"}},
        {ExperimentKind::dynamic, {"error_probs", "arrival_rates", "modes"}},
        {ExperimentKind::stability_sweep, {"error_probs", "arrival_rates", "modes"}},
        {ExperimentKind::utility, {"error_probs", "users"}},
        {ExperimentKind::markov, {"zetas"}},
        {ExperimentKind::lossy_d2d, {"error_probs", "gammas"}},
    };
    return keys;
}

void parse_kind_fields(ExperimentConfig& cfg, const YAML::Node& doc, const Reader& rd)
{
    auto need = [&](const char* key) {
        if (!doc[key]) {
            rd.fail(doc, key, "required for kind '" + std::string(to_string(cfg.kind)) + "'");
        }
        return doc[key];
    };
    switch (cfg.kind) {
    case ExperimentKind::ratios:
        cfg.error_probs = rd.probabilities(need("error_probs"), "error_probs", true);
        break;
    case ExperimentKind::n_symmetric_sweep:
    case ExperimentKind::utility:
        cfg.error_probs = rd.probabilities(need("error_probs"), "error_probs", true);
        cfg.users = rd.int_range(need("users"), "users", cfg.kind == ExperimentKind::utility ? 2 : 1, 64);
        if (cfg.trials > 0) {
            for (int n : cfg.users) {
                if (n > kMaxUsers) {
                    rd.fail(doc["users"], "users", "simulation supports at most " + std::to_string(kMaxUsers) +
                                                       " users; set trials: 0 for formulas only");
                }
            }
        }
        break;
    case ExperimentKind::asym_two_user:
        cfg.points = rd.tuples(need("pairs"), "pairs", 2, true);
        break;
    case ExperimentKind::lp_three_user:
        cfg.points = rd.tuples(need("triples"), "triples", 3, true);
        if (doc["reciprocity_form"]) {
            const std::string f = doc["reciprocity_form"].as<std::string>();
            if (f == "balanced") {
                cfg.reciprocity_form = ReciprocityForm::balanced;
            } else if (f == "same_coefficient") {
                cfg.reciprocity_form = ReciprocityForm::same_coefficient;
            } else {
                rd.fail(doc["reciprocity_form"], "reciprocity_form", "expected 'balanced' or 'same_coefficient'");
            }
        }
        break;
    case ExperimentKind::grouping:
        if (doc["triples"]) {
            cfg.points = rd.tuples(doc["triples"], "triples", 3, true);
        } else {
            const YAML::Node g = need("grid");
            for (const char* key : {"p1", "p2", "p3"}) {
                if (!g[key]) {
                    rd.fail(g, std::string("grid.") + key, "required");
                }
            }
            const auto p1 = rd.probabilities(g["p1"], "grid.p1", false);
            const auto p2 = rd.probabilities(g["p2"], "grid.p2", false);
            const auto p3 = rd.probabilities(g["p3"], "grid.p3", false);
            for (double a : p1) {
                for (double b : p2) {
                    for (double c : p3) {
                        std::vector<double> t = {a, b, c};
                        std::sort(t.begin(), t.end());
                        cfg.points.push_back(std::move(t));
                    }
                }
            }
        }
        break;
    case ExperimentKind::dynamic:
    case ExperimentKind::stability_sweep: {
        cfg.error_probs = rd.probabilities(need("error_probs"), "error_probs", true);
        if (cfg.error_probs.size() < 2 || cfg.error_probs.size() > static_cast<std::size_t>(kMaxVirtualUsers)) {
            rd.fail(doc["error_probs"], "error_probs",
                    "needs one entry per user, 2.." + std::to_string(kMaxVirtualUsers) + " users");
        }
        cfg.arrival_rates = rd.probabilities(need("arrival_rates"), "arrival_rates", true);
        if (!std::is_sorted(cfg.arrival_rates.begin(), cfg.arrival_rates.end())) {
            rd.fail(doc["arrival_rates"], "arrival_rates", "must be sorted ascending");
        }
        const YAML::Node modes = need("modes");
        if (!modes.IsSequence() || modes.size() == 0) {
            rd.fail(modes, "modes", "expected a list of centralized / distributed / no_grouping");
        }
        for (std::size_t k = 0; k < modes.size(); ++k) {
            try {
                cfg.modes.push_back(parse_scheduling_mode(modes[k].as<std::string>()));
            } catch (const std::exception& e) {
                rd.fail(modes[k], "modes[" + std::to_string(k) + "]", e.what());
            }
        }
        break;
    }
    case ExperimentKind::markov:
        cfg.points = rd.tuples(need("zetas"), "zetas", 2, false, true);
        for (std::size_t k = 0; k < cfg.points.size(); ++k) {
            if (cfg.points[k][0] == 0.0 && cfg.points[k][1] == 0.0) {
                rd.fail(doc["zetas"][k], "zetas[" + std::to_string(k) + "]",
                        "zeta_01 and zeta_10 cannot both be 0 (no stationary distribution)");
            }
        }
        break;
    case ExperimentKind::lossy_d2d:
        cfg.error_probs = rd.probabilities(need("error_probs"), "error_probs", false);
        cfg.gammas = rd.probabilities(need("gammas"), "gammas", false);
        break;
    }
}

nlohmann::json to_json(const YAML::Node& node)
{
    switch (node.Type()) {
    case YAML::NodeType::Sequence: {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& item : node) {
            a.push_back(to_json(item));
        }
        return a;
    }
    case YAML::NodeType::Map: {
        nlohmann::json o = nlohmann::json::object();
        for (const auto& kv : node) {
            o[kv.first.as<std::string>()] = to_json(kv.second);
        }
        return o;
    }
    case YAML::NodeType::Scalar: {
        const std::string& s = node.Scalar();
        double d = 0.0;
        auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
        if (ec == std::errc{} && end == s.data() + s.size()) {
            if (s.find_first_of(".eE") == std::string::npos && std::abs(d) < 9.0e15) {
                return static_cast<std::int64_t>(d);
            }
            return d;
        }
        if (s == "true" || s == "false") {
            return s == "true";
        }
        return s;
    }
    default: return nullptr;
    }
}

// ---------------------------------------------------------------------------
// CSV building

class Csv {
public:
    explicit Csv(std::vector<std::string> header) : width_(header.size())
    {
        line(header);
    }

    template <typename... Cells>
    void row(const Cells&... cells)
    {
        std::vector<std::string> r;
        (r.push_back(cell(cells)), ...);
        if (r.size() != width_) {
            throw std::logic_error("CSV row width does not match the header");
        }
        line(r);
        ++rows_;
    }

    void row(const std::vector<std::string>& cells)
    {
        if (cells.size() != width_) {
            throw std::logic_error("CSV row width does not match the header");
        }
        line(cells);
        ++rows_;
    }

    static std::string cell(double v) { return format_number(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(std::uint64_t v) { return std::to_string(v); }
    static std::string cell(bool v) { return v ? "true" : "false"; }
    static std::string cell(std::string_view v) { return std::string(v); }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }

    std::string str() const { return out_.str(); }
    std::size_t rows() const { return rows_; }

private:
    void line(const std::vector<std::string>& cells)
    {
        for (std::size_t k = 0; k < cells.size(); ++k) {
            out_ << (k ? "," : "") << cells[k];
        }
        out_ << '\n';
    }

    std::size_t width_;
    std::size_t rows_ = 0;
    std::ostringstream out_;
};

std::uint64_t row_seed(const ExperimentConfig& cfg, std::uint64_t row)
{
    std::uint64_t x = cfg.seed ^ (row * 0x9e3779b97f4a7c15ULL);
    return splitmix64(x);
}

SimulationSummary simulate(const ExperimentConfig& cfg, std::uint64_t row, std::vector<ChannelModel> channels,
                           Strategy strategy, std::optional<SharingPolicy> policy = {}, double gamma = 0.0,
                           UserMask group = 0)
{
    DisseminationConfig d;
    d.channels = std::move(channels);
    d.strategy = strategy;
    d.policy = std::move(policy);
    d.d2d.error_prob = gamma;
    d.group = group;
    d.trials = cfg.trials;
    d.seed = row_seed(cfg, row);
    d.slot_cap = cfg.slot_cap;
    return simulate_completion(d);
}

std::vector<ChannelModel> symmetric(double pe, int n)
{
    return iid_channels(std::vector<double>(static_cast<std::size_t>(n), pe));
}

std::vector<std::string> with_sim(std::vector<std::string> header, bool sim, std::vector<std::string> extra)
{
    if (sim) {
        header.insert(header.end(), extra.begin(), extra.end());
    }
    return header;
}

// ---------------------------------------------------------------------------
// kinds

ExperimentResult run_ratios(const ExperimentConfig& cfg)
{
    const bool sim = cfg.trials > 0;
    Csv csv(with_sim({"p_e", "T_eq", "T_neq", "T_union", "R_identify", "R_social"}, sim,
                     {"sim_T_union", "sim_T_union_se"}));
    std::uint64_t k = 0;
    for (double pe : cfg.error_probs) {
        std::vector<std::string> r = {Csv::cell(pe),
                                      Csv::cell(t_eq_two_symmetric(pe)),
                                      Csv::cell(t_neq_two_symmetric(pe)),
                                      Csv::cell(t_union_two_symmetric(pe)),
                                      Csv::cell(improvement_ratio_identify(pe)),
                                      Csv::cell(improvement_ratio_social(pe))};
        if (sim) {
            const auto s = pe < 1.0 ? simulate(cfg, k, symmetric(pe, 2), Strategy::always_share) : SimulationSummary{};
            r.push_back(Csv::cell(pe < 1.0 ? s.mean : unbounded<double>()));
            r.push_back(Csv::cell(s.std_error));
        }
        csv.row(r);
        ++k;
    }
    return {csv.str(), {{"rows", csv.rows()}}};
}

ExperimentResult run_n_symmetric(const ExperimentConfig& cfg)
{
    const bool sim = cfg.trials > 0;
    Csv csv(with_sim({"p_e", "N", "T_eq", "T_union"}, sim, {"sim_T_union", "sim_T_union_se"}));
    std::uint64_t k = 0;
    for (double pe : cfg.error_probs) {
        for (int n : cfg.users) {
            std::vector<std::string> r = {Csv::cell(pe), Csv::cell(n), Csv::cell(t_eq_n_symmetric(pe, n)),
                                          Csv::cell(t_union_n_symmetric(pe, n))};
            if (sim) {
                if (pe < 1.0) {
                    const auto s = simulate(cfg, k, symmetric(pe, n), Strategy::uniform_share);
                    r.push_back(Csv::cell(s.mean));
                    r.push_back(Csv::cell(s.std_error));
                } else {
                    r.push_back(Csv::cell(unbounded<double>()));
                    r.push_back(Csv::cell(0.0));
                }
            }
            csv.row(r);
            ++k;
        }
    }
    return {csv.str(), {{"rows", csv.rows()}}};
}

ExperimentResult run_asym_two(const ExperimentConfig& cfg)
{
    const bool sim = cfg.trials > 0;
    Csv csv(with_sim({"p_e1", "p_e2", "T_eq", "T_full", "T_union", "p_star_12", "p_star_21", "cooperation_loss"},
                     sim, {"sim_T_union", "sim_T_union_se", "sim_deliveries_12", "sim_deliveries_21"}));
    std::uint64_t k = 0;
    for (const auto& pt : cfg.points) {
        const auto a = asym_two_user(pt[0], pt[1]);
        std::vector<std::string> r = {Csv::cell(pt[0]),          Csv::cell(pt[1]),
                                      Csv::cell(a.times.t_eq),   Csv::cell(a.times.t_full),
                                      Csv::cell(a.times.t_union), Csv::cell(a.p_star_12),
                                      Csv::cell(a.p_star_21),    Csv::cell(asym_cooperation_loss(pt[0], pt[1]))};
        if (sim) {
            const auto s = simulate(cfg, k, iid_channels(pt), Strategy::policy, pair_optimum_policy(pt[0], pt[1]));
            r.push_back(Csv::cell(s.mean));
            r.push_back(Csv::cell(s.std_error));
            r.push_back(Csv::cell(s.deliveries(0, 1)));
            r.push_back(Csv::cell(s.deliveries(1, 0)));
        }
        csv.row(r);
        ++k;
    }
    return {csv.str(), {{"rows", csv.rows()}}};
}

ExperimentResult run_lp(const ExperimentConfig& cfg)
{
    const bool sim = cfg.trials > 0;
    std::vector<std::string> header = {"p_e1", "p_e2", "p_e3", "T_union"};
    for (int v = 0; v < kThreeUserVars; ++v) {
        header.emplace_back(variable_name(static_cast<ThreeUserVar>(v)));
    }
    header.emplace_back("max_reciprocity_residual");
    Csv csv(with_sim(header, sim, {"sim_T_union", "sim_T_union_se", "sim_max_asymmetry_z"}));
    std::uint64_t k = 0;
    for (const auto& pt : cfg.points) {
        const Eigen::Vector3d pe(pt[0], pt[1], pt[2]);
        const auto opt = optimal_three_user(pe, cfg.reciprocity_form);
        std::vector<std::string> r = {Csv::cell(pt[0]), Csv::cell(pt[1]), Csv::cell(pt[2]),
                                      Csv::cell(opt.solution.value)};
        for (int v = 0; v < kThreeUserVars; ++v) {
            r.push_back(Csv::cell(opt.solution.x(v)));
        }
        r.push_back(Csv::cell(reciprocity_residuals(pe, opt.solution.x).cwiseAbs().maxCoeff()));
        if (sim) {
            const auto s = simulate(cfg, k, iid_channels(pt), Strategy::policy, opt.policy);
            r.push_back(Csv::cell(s.mean));
            r.push_back(Csv::cell(s.std_error));
            r.push_back(Csv::cell(ReciprocityMatrix{s.deliveries, s.asymmetry_se}.max_asymmetry_z()));
        }
        csv.row(r);
        ++k;
    }
    return {csv.str(), {{"rows", csv.rows()}}};
}

ExperimentResult run_grouping(const ExperimentConfig& cfg)
{
    const bool sim = cfg.trials > 0;
    Csv csv(with_sim({"p_e1", "p_e2", "p_e3", "T_G1", "T_G2", "ratio"}, sim,
                     {"sim_T_G1", "sim_T_G1_se", "sim_T_G2", "sim_T_G2_se"}));
    double min_ratio = std::numeric_limits<double>::infinity();
    std::uint64_t k = 0;
    for (const auto& pt : cfg.points) {
        const Eigen::Vector3d pe(pt[0], pt[1], pt[2]);
        const auto g = grouping_compare(pe);
        min_ratio = std::min(min_ratio, g.ratio);
        std::vector<std::string> r = {Csv::cell(pt[0]), Csv::cell(pt[1]), Csv::cell(pt[2]),
                                      Csv::cell(g.t_g1), Csv::cell(g.t_g2), Csv::cell(g.ratio)};
        if (sim) {
            SharingPolicy pair(3);
            pair.set(0, 0b010, pair_share_probability(pt[0], pt[1]));
            pair.set(1, 0b001, 1.0);
            const auto s1 = simulate(cfg, 2 * k, iid_channels(pt), Strategy::policy, pair, 0.0, 0b011);
            const auto s2 = simulate(cfg, 2 * k + 1, iid_channels(pt), Strategy::policy, optimal_three_user(pe).policy);
            r.push_back(Csv::cell(s1.mean));
            r.push_back(Csv::cell(s1.std_error));
            r.push_back(Csv::cell(s2.mean));
            r.push_back(Csv::cell(s2.std_error));
        }
        csv.row(r);
        ++k;
    }
    return {csv.str(), {{"rows", csv.rows()}, {"min_ratio", min_ratio}}};
}

std::vector<StabilityPoint> run_dynamic_grid(const ExperimentConfig& cfg, SchedulingMode mode)
{
    DynamicConfig base;
    base.channels = iid_channels(cfg.error_probs);
    base.horizon = cfg.horizon;
    base.mode = mode;
    base.seed = cfg.seed;
    base.stream = static_cast<std::uint64_t>(mode) * 1000003ULL;
    return estimate_stability_boundary(base, cfg.arrival_rates).points;
}

ExperimentResult run_dynamic_kind(const ExperimentConfig& cfg)
{
    Csv csv({"mode", "lambda", "average_queue", "average_queue_se", "average_completion",
             "average_completion_se", "sharing_probability", "max_reciprocity_drift", "queue_slope", "stable"});
    for (SchedulingMode mode : cfg.modes) {
        for (const auto& p : run_dynamic_grid(cfg, mode)) {
            const auto& r = p.report;
            csv.row(to_string(mode), p.arrival_rate, r.average_queue, r.average_queue_se, r.average_completion,
                    r.average_completion_se, r.sharing_probability, r.max_reciprocity_drift(), r.queue_slope,
                    r.stable);
        }
    }
    return {csv.str(), {{"rows", csv.rows()}}};
}

ExperimentResult run_stability(const ExperimentConfig& cfg)
{
    Csv csv({"mode", "lambda", "stable", "queue_slope", "average_queue", "final_queue", "sharing_probability"});
    nlohmann::json metrics = nlohmann::json::object();
    nlohmann::json boundaries = nlohmann::json::object();
    for (SchedulingMode mode : cfg.modes) {
        const auto points = run_dynamic_grid(cfg, mode);
        double boundary = std::numeric_limits<double>::quiet_NaN();
        for (const auto& p : points) {
            const auto& r = p.report;
            csv.row(to_string(mode), p.arrival_rate, r.stable, r.queue_slope, r.average_queue,
                    static_cast<std::uint64_t>(r.final_queue), r.sharing_probability);
        }
        for (const auto& p : points) {
            if (!p.report.stable) {
                break;
            }
            boundary = p.arrival_rate;
        }
        boundaries[std::string(to_string(mode))] = std::isnan(boundary) ? nlohmann::json(nullptr) : nlohmann::json(boundary);
    }
    metrics["rows"] = csv.rows();
    metrics["boundary"] = boundaries;
    const auto& pe = cfg.error_probs;
    if (pe.size() == 2 && pe[0] == pe[1]) {
        const auto b = stability_bounds_two_symmetric(pe[0]);
        metrics["closed_form"] = {{"centralized", b.centralized}, {"distributed", b.distributed}, {"ratio", b.ratio}};
    }
    return {csv.str(), metrics};
}

ExperimentResult run_utility(const ExperimentConfig& cfg)
{
    const bool sim = cfg.trials > 0;
    Csv csv(with_sim({"p_e", "N", "download", "upload", "utility", "download_upload_ratio"}, sim,
                     {"sim_download_upload_ratio", "sim_download_upload_ratio_se"}));
    std::uint64_t k = 0;
    for (double pe : cfg.error_probs) {
        for (int n : cfg.users) {
            const auto u = utility_n_symmetric(pe, n);
            std::vector<std::string> r = {Csv::cell(pe), Csv::cell(n), Csv::cell(u.download), Csv::cell(u.upload),
                                          Csv::cell(u.utility), Csv::cell(u.download / u.upload)};
            if (sim) {
                if (pe < 1.0) {
                    const auto s = simulate(cfg, k, symmetric(pe, n), Strategy::uniform_share);
                    r.push_back(Csv::cell(s.download_upload_ratio));
                    r.push_back(Csv::cell(s.download_upload_ratio_se));
                } else {
                    r.push_back(Csv::cell(std::numeric_limits<double>::quiet_NaN()));
                    r.push_back(Csv::cell(std::numeric_limits<double>::quiet_NaN()));
                }
            }
            csv.row(r);
            ++k;
        }
    }
    return {csv.str(), {{"rows", csv.rows()}}};
}

ExperimentResult run_markov(const ExperimentConfig& cfg)
{
    const bool sim = cfg.trials > 0;
    Csv csv(with_sim({"zeta_01", "zeta_10", "pi_0", "T_eq", "T_union", "ratio"}, sim,
                     {"sim_T_eq", "sim_T_eq_se", "sim_T_union", "sim_T_union_se"}));
    std::uint64_t k = 0;
    for (const auto& pt : cfg.points) {
        const auto m = markov_two_symmetric(pt[0], pt[1]);
        std::vector<std::string> r = {Csv::cell(pt[0]), Csv::cell(pt[1]), Csv::cell(markov_steady_state(MarkovChannel{pt[0], pt[1], std::nullopt}).pi_0),
                                      Csv::cell(m.t_eq), Csv::cell(m.t_union), Csv::cell(m.ratio)};
        if (sim) {
            const MarkovChannel ch{pt[0], pt[1], std::nullopt};
            const std::vector<ChannelModel> channels = {ch, ch};
            const auto s1 = simulate(cfg, 2 * k, channels, Strategy::no_sharing);
            const auto s2 = simulate(cfg, 2 * k + 1, channels, Strategy::always_share);
            r.push_back(Csv::cell(s1.mean));
            r.push_back(Csv::cell(s1.std_error));
            r.push_back(Csv::cell(s2.mean));
            r.push_back(Csv::cell(s2.std_error));
        }
        csv.row(r);
        ++k;
    }
    return {csv.str(), {{"rows", csv.rows()}}};
}

ExperimentResult run_lossy(const ExperimentConfig& cfg)
{
    const bool sim = cfg.trials > 0;
    Csv csv(with_sim({"p_e", "gamma", "p_star", "T_union", "ratio"}, sim, {"sim_T_union", "sim_T_union_se"}));
    std::uint64_t k = 0;
    for (double pe : cfg.error_probs) {
        for (double g : cfg.gammas) {
            const auto l = unreliable_local_two_symmetric(pe, g);
            std::vector<std::string> r = {Csv::cell(pe), Csv::cell(g), Csv::cell(l.p_star), Csv::cell(l.t_union),
                                          Csv::cell(l.ratio)};
            if (sim) {
                SharingPolicy pol(2);
                pol.set(0, 0b10, l.p_star);
                pol.set(1, 0b01, l.p_star);
                const auto s = simulate(cfg, k, symmetric(pe, 2), Strategy::policy, pol, g);
                r.push_back(Csv::cell(s.mean));
                r.push_back(Csv::cell(s.std_error));
            }
            csv.row(r);
            ++k;
        }
    }
    return {csv.str(), {{"rows", csv.rows()}}};
}

}  // namespace

std::string format_number(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    if (v == 0.0) {
        return "0";
    }
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), end);
}

std::string_view to_string(ExperimentKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

const std::vector<ExperimentKind>& all_kinds()
{
    static const std::vector<ExperimentKind> kinds = {
        ExperimentKind::ratios,          ExperimentKind::n_symmetric_sweep, ExperimentKind::asym_two_user,
        ExperimentKind::lp_three_user,   ExperimentKind::grouping,          ExperimentKind::dynamic,
        ExperimentKind::stability_sweep, ExperimentKind::utility,           ExperimentKind::markov,
        ExperimentKind::lossy_d2d,
    };
    return kinds;
}

std::string_view describe(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::ratios: return "two symmetric users: completion times and improvement ratios vs p_e";
    case ExperimentKind::n_symmetric_sweep: return "N symmetric users: T_eq and T_union vs N";
    case ExperimentKind::asym_two_user: return "two asymmetric users: optimal sharing probability and times";
    case ExperimentKind::lp_three_user: return "three asymmetric users: LP-optimal sharing policy";
    case ExperimentKind::grouping: return "pair-plus-outsider vs three-user grouping";
    case ExperimentKind::dynamic: return "back-pressure scheduling: queue size, delay, sharing vs lambda";
    case ExperimentKind::stability_sweep: return "empirical stability boundary over a lambda grid";
    case ExperimentKind::utility: return "download/upload ratio under the uniform sharer rule";
    case ExperimentKind::markov: return "two users with Markov ON/OFF channels";
    case ExperimentKind::lossy_d2d: return "two users with a lossy D2D link";
    }
    return "";
}

ExperimentConfig parse_config(const std::string& text, const std::string& source)
{
    YAML::Node doc;
    try {
        doc = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    const Reader rd(source);
    if (!doc.IsMap()) {
        rd.fail(doc, "<root>", "expected a mapping");
    }
    if (!doc["kind"]) {
        rd.fail(doc, "kind", "required");
    }
    ExperimentConfig cfg;
    cfg.source = source;
    cfg.document = doc;
    const std::string kind = doc["kind"].Scalar();
    const auto it = std::find(kKindNames.begin(), kKindNames.end(), kind);
    if (it == kKindNames.end()) {
        rd.fail(doc["kind"], "kind", "unknown experiment kind '" + kind + "'");
    }
    cfg.kind = static_cast<ExperimentKind>(it - kKindNames.begin());

    std::set<std::string> allowed = {"kind", "name", "seed", "trials", "horizon", "slot_cap", "output"};
    const auto& extra = kind_keys().at(cfg.kind);
    allowed.insert(extra.begin(), extra.end());
    for (const auto& kv : doc) {
        const std::string key = kv.first.as<std::string>();
        if (!allowed.count(key)) {
            rd.fail(kv.first, key, "unknown field for kind '" + kind + "'");
        }
    }

    cfg.name = doc["name"] ? doc["name"].as<std::string>() : kind;
    if (cfg.name.empty() || cfg.name.find('/') != std::string::npos) {
        rd.fail(doc["name"], "name", "must be a plain file stem");
    }
    if (doc["seed"]) {
        cfg.seed = rd.count(doc["seed"], "seed", 0);
    }
    if (doc["trials"]) {
        cfg.trials = rd.count(doc["trials"], "trials", 0);
    }
    if (doc["horizon"]) {
        cfg.horizon = rd.count(doc["horizon"], "horizon", 1);
    }
    if (doc["slot_cap"]) {
        cfg.slot_cap = rd.count(doc["slot_cap"], "slot_cap", 1);
    }
    if (doc["output"]) {
        cfg.output = doc["output"].as<std::string>();
    }
    parse_kind_fields(cfg, doc, rd);
    return cfg;
}

ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(path + ": cannot open file");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg)
{
    ExperimentResult res;
    switch (cfg.kind) {
    case ExperimentKind::ratios: res = run_ratios(cfg); break;
    case ExperimentKind::n_symmetric_sweep: res = run_n_symmetric(cfg); break;
    case ExperimentKind::asym_two_user: res = run_asym_two(cfg); break;
    case ExperimentKind::lp_three_user: res = run_lp(cfg); break;
    case ExperimentKind::grouping: res = run_grouping(cfg); break;
    case ExperimentKind::dynamic: res = run_dynamic_kind(cfg); break;
    case ExperimentKind::stability_sweep: res = run_stability(cfg); break;
    case ExperimentKind::utility: res = run_utility(cfg); break;
    case ExperimentKind::markov: res = run_markov(cfg); break;
    case ExperimentKind::lossy_d2d: res = run_lossy(cfg); break;
    }
    nlohmann::json summary;
    summary["kind"] = std::string(to_string(cfg.kind));
    summary["name"] = cfg.name;
    summary["seed"] = cfg.seed;
    summary["tool_version"] = EQRECIP_VERSION;
    summary["parameters"] = to_json(cfg.document);
    summary["metrics"] = res.summary;
    res.summary = summary;
    return res;
}

std::string write_result(const ExperimentConfig& cfg, const ExperimentResult& result, const std::string& dir)
{
    namespace fs = std::filesystem;
    const fs::path base = dir.empty() ? fs::path(".") : fs::path(dir);
    fs::create_directories(base);
    const fs::path csv = base / (cfg.name + ".csv");
    const fs::path json = base / (cfg.name + ".json");
    {
        std::ofstream out(csv, std::ios::binary);
        out << result.csv;
        if (!out) {
            throw std::runtime_error("cannot write " + csv.string());
        }
    }
    {
        std::ofstream out(json, std::ios::binary);
        out << result.summary.dump(2) << '\n';
        if (!out) {
            throw std::runtime_error("cannot write " + json.string());
        }
    }
    return csv.string();
}

}  // namespace eqr::tools
