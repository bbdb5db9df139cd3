#include "eqrecip/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace eqr {

namespace {

void check_probability(double p, const char* what)
{
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument(std::string(what) + " must lie in [0, 1], got " +
                                    std::to_string(p));
    }
}

}  // namespace

ChannelStateVector::ChannelStateVector(std::initializer_list<int> states)
    : size_(static_cast<int>(states.size()))
{
    if (size_ > kMaxUsers) {
        throw std::invalid_argument("channel state vector longer than kMaxUsers");
    }
    int i = 0;
    for (int s : states) {
        if (s != 0) {
            bits_ |= UserMask{1} << i;
        }
        ++i;
    }
}

std::string ChannelStateVector::to_string() const
{
    std::string out = "(";
    for (int i = 0; i < size_; ++i) {
        if (i > 0) {
            out += ',';
        }
        out += (*this)[i] ? '1' : '0';
    }
    return out + ")";
}

void validate(const IidChannel& ch) { check_probability(ch.error_prob, "error_prob"); }

void validate(const MarkovChannel& ch)
{
    check_probability(ch.zeta_01, "zeta_01");
    check_probability(ch.zeta_10, "zeta_10");
}

void validate(const D2dChannel& ch) { check_probability(ch.error_prob, "d2d error_prob"); }

void validate(const ChannelModel& ch)
{
    std::visit([](const auto& c) { validate(c); }, ch);
}

ChannelStateVector sample_state(std::span<ChannelModel> models, Rng& rng)
{
    const int n = static_cast<int>(models.size());
    if (n > kMaxUsers) {
        throw std::invalid_argument("too many users for a channel state vector");
    }
    UserMask bits = 0;
    for (int i = 0; i < n; ++i) {
        bool on;
        if (auto* iid = std::get_if<IidChannel>(&models[i])) {
            on = !rng.bernoulli(iid->error_prob);
        } else {
            auto& mk = std::get<MarkovChannel>(models[i]);
            if (!mk.state) {
                on = rng.bernoulli(markov_steady_state(mk).pi_1);
            } else if (*mk.state) {
                on = !rng.bernoulli(mk.zeta_10);
            } else {
                on = rng.bernoulli(mk.zeta_01);
            }
            mk.state = on;
        }
        if (on) {
            bits |= UserMask{1} << i;
        }
    }
    return ChannelStateVector(bits, n);
}

double state_probability(std::span<const double> error_probs, const ChannelStateVector& state)
{
    if (static_cast<int>(error_probs.size()) != state.size()) {
        throw std::invalid_argument("state length does not match the number of channels");
    }
    double p = 1.0;
    for (int i = 0; i < state.size(); ++i) {
        p *= state[i] ? 1.0 - error_probs[i] : error_probs[i];
    }
    return p;
}

double state_probability(std::span<const ChannelModel> models, const ChannelStateVector& state)
{
    std::vector<double> pe;
    pe.reserve(models.size());
    for (const auto& m : models) {
        pe.push_back(error_probability(m));
    }
    return state_probability(pe, state);
}

SteadyState markov_steady_state(const MarkovChannel& ch)
{
    const double total = ch.zeta_01 + ch.zeta_10;
    if (!(total > 0.0)) {
        throw std::domain_error("Markov channel with zeta_01 = zeta_10 = 0 has no unique steady state");
    }
    const double pi_0 = ch.zeta_10 / total;
    return {pi_0, 1.0 - pi_0};
}

double on_probability(const ChannelModel& ch)
{
    if (const auto* iid = std::get_if<IidChannel>(&ch)) {
        return 1.0 - iid->error_prob;
    }
    return markov_steady_state(std::get<MarkovChannel>(ch)).pi_1;
}

double error_probability(const ChannelModel& ch)
{
    if (const auto* iid = std::get_if<IidChannel>(&ch)) {
        return iid->error_prob;
    }
    throw std::invalid_argument("state probability is state-dependent for Markov channels");
}

std::vector<ChannelModel> iid_channels(std::span<const double> error_probs)
{
    std::vector<ChannelModel> out;
    out.reserve(error_probs.size());
    for (double p : error_probs) {
        IidChannel ch{p};
        validate(ch);
        out.emplace_back(ch);
    }
    return out;
}

bool is_iid(std::span<const ChannelModel> models)
{
    for (const auto& m : models) {
        if (!std::holds_alternative<IidChannel>(m)) {
            return false;
        }
    }
    return true;
}

void reset_to_stationary(std::span<ChannelModel> models)
{
    for (auto& m : models) {
        if (auto* mk = std::get_if<MarkovChannel>(&m)) {
            mk->state.reset();
        }
    }
}

}  // namespace eqr
