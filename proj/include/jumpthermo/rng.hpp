// rng.hpp — Counter-based splittable random streams (Philox4x32-10).
//
// Stream k of a run is keyed by (master_seed, k), so trajectories own
// independent substreams with no shared state and reproduce bit-identically
// under any parallel schedule.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace jumpthermo::rng {

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b,
                    std::uint32_t& hi, std::uint32_t& lo) {
    std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

} // namespace detail

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

// One 10-round Philox4x32 block: 128 output bits per (counter, key) pair.
inline Counter philox4x32(Counter ctr, Key key) {
    using namespace detail;
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = Counter{hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    return ctr;
}

// A single splittable stream: draws advance a 64-bit block counter, while
// (master_seed, stream_id) select the substream.
class Stream {
public:
    Stream() : Stream(0, 0) {}

    Stream(std::uint64_t master_seed, std::uint64_t stream_id)
        : key_{static_cast<std::uint32_t>(master_seed),
               static_cast<std::uint32_t>(master_seed >> 32)},
          stream_lo_(static_cast<std::uint32_t>(stream_id)),
          stream_hi_(static_cast<std::uint32_t>(stream_id >> 32)) {}

    std::uint64_t next_u64() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        Counter ctr{static_cast<std::uint32_t>(block_),
                    static_cast<std::uint32_t>(block_ >> 32),
                    stream_lo_, stream_hi_};
        ++block_;
        Counter out = philox4x32(ctr, key_);
        spare_ = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
        have_spare_ = true;
        return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log argument.
    double uniform_open() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Exponential waiting time with the given rate; +inf when rate == 0.
    double exponential(double rate) {
        if (rate <= 0.0) return std::numeric_limits<double>::infinity();
        return -std::log(uniform_open()) / rate;
    }

    // Index in [0, n) with probabilities proportional to weights[0..n).
    template <class Weights>
    int choose(const Weights& weights, int n) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += weights[i];
        double u = uniform() * total;
        double acc = 0.0;
        for (int i = 0; i < n - 1; ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return n - 1;
    }

private:
    Key key_;
    std::uint32_t stream_lo_, stream_hi_;
    std::uint64_t block_ = 0;
    std::uint64_t spare_ = 0;
    bool have_spare_ = false;
};

} // namespace jumpthermo::rng
