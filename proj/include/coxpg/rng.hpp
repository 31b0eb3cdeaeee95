#ifndef COXPG_RNG_HPP
#define COXPG_RNG_HPP

#include <cstdint>
#include <random>

namespace coxpg {

/// Seeded random stream. The engine is std::mt19937_64, whose output sequence
/// is fixed by the standard; every variate below is derived from raw engine
/// words with our own transforms, so a (seed, stream) pair produces the same
/// sequence on every platform. Not thread-safe: one owner per stream.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// A new, statistically independent stream sharing this seed.
    RngStream substream(std::uint64_t id) const;

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform();
    double normal();
    /// Exponential with rate 1.
    double exponential();
    /// Gamma(shape, 1) via Marsaglia-Tsang (with the shape < 1 boost).
    double gamma(double shape);

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// SplitMix64 finalizer; used to derive engine seeds from (seed, stream).
std::uint64_t mix64(std::uint64_t x);

}  // namespace coxpg

#endif  // COXPG_RNG_HPP
