#ifndef AIFMAZE_RNG_HPP
#define AIFMAZE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace aifmaze {

// Deterministic RNG. The raw stream comes from std::mt19937_64; the
// distributions are implemented here because the standard library leaves
// theirs implementation-defined, which would break reproducible runs across
// toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), unbiased.
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    bool coin() { return (gen_() & 1u) != 0; }

    // Standard normal via Box-Muller (no cached spare, so state is just the
    // engine state).
    double normal() {
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::string state() const {
        std::ostringstream os;
        os << gen_;
        return os.str();
    }

    void set_state(const std::string& s) {
        std::istringstream is(s);
        is >> gen_;
        if (is.fail()) throw std::runtime_error("Rng::set_state: malformed state string");
    }

private:
    std::mt19937_64 gen_;
};

} // namespace aifmaze

#endif
