#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "eqrecip/rng.hpp"

namespace eqr {

/// Largest group handled by the bitmask-based state vectors.
inline constexpr int kMaxUsers = 16;

using UserMask = std::uint32_t;

inline UserMask full_mask(int n) { return n >= 32 ? ~UserMask{0} : (UserMask{1} << n) - 1; }
inline bool has_user(UserMask m, int i) { return (m >> i) & 1U; }
inline int popcount(UserMask m) { return __builtin_popcount(m); }

/// B2D channel with an i.i.d. per-slot OFF probability.
struct IidChannel {
    double error_prob = 0.0;
};

/*!
 * Two-state Markov (Gilbert-Elliott style) ON/OFF channel.
 *
 * zeta_01 is P(OFF -> ON) and zeta_10 is P(ON -> OFF). `state` is the state
 * of the previous slot; when unset the first draw comes from the stationary
 * distribution.
 */
struct MarkovChannel {
    double zeta_01 = 1.0;
    double zeta_10 = 0.0;
    std::optional<bool> state;
};

/// D2D link; error_prob is the per-attempt loss probability gamma.
struct D2dChannel {
    double error_prob = 0.0;
};

using ChannelModel = std::variant<IidChannel, MarkovChannel>;

struct SteadyState {
    double pi_0;  ///< long-run fraction OFF
    double pi_1;  ///< long-run fraction ON
};

/// Per-user ON(1)/OFF(0) vector for one slot, stored as a bitmask.
class ChannelStateVector {
public:
    ChannelStateVector() = default;
    ChannelStateVector(UserMask bits, int size) : bits_(bits & full_mask(size)), size_(size) {}
    ChannelStateVector(std::initializer_list<int> states);

    int size() const { return size_; }
    bool operator[](int i) const { return has_user(bits_, i); }
    UserMask bits() const { return bits_; }
    bool all_on() const { return bits_ == full_mask(size_); }
    bool all_off() const { return bits_ == 0; }

    friend bool operator==(const ChannelStateVector&, const ChannelStateVector&) = default;

    std::string to_string() const;

private:
    UserMask bits_ = 0;
    int size_ = 0;
};

void validate(const IidChannel& ch);
void validate(const MarkovChannel& ch);
void validate(const D2dChannel& ch);
void validate(const ChannelModel& ch);

/// Draws the channel vector for one slot; advances Markov channel states.
ChannelStateVector sample_state(std::span<ChannelModel> models, Rng& rng);

/// P(state) for independent i.i.d. channels. Throws for Markov models.
double state_probability(std::span<const ChannelModel> models, const ChannelStateVector& state);
double state_probability(std::span<const double> error_probs, const ChannelStateVector& state);

SteadyState markov_steady_state(const MarkovChannel& ch);

/// Long-run ON probability (1 - p_e or pi_1).
double on_probability(const ChannelModel& ch);

/// Per-slot OFF probability of an i.i.d. channel. Throws for Markov models.
double error_probability(const ChannelModel& ch);

std::vector<ChannelModel> iid_channels(std::span<const double> error_probs);

bool is_iid(std::span<const ChannelModel> models);

/// Restores every Markov channel to "unset" so the next draw is stationary.
void reset_to_stationary(std::span<ChannelModel> models);

}  // namespace eqr
