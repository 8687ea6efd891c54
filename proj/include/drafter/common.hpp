#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace drafter {

// Invalid inputs or broken invariants detected at a module boundary.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem / serialization failures. Messages always name the path.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Divergence or other unrecoverable training-loop failures.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {
// splitmix64 finalizer.
inline uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;
}  // namespace detail

// Counter-based deterministic RNG stream. The i-th draw is a pure function
// of (seed, stream, i), so a stream can be checkpointed by its cursor and
// forked into independent child streams without shared state.
class RngStream {
  public:
    explicit RngStream(uint64_t seed, uint64_t stream = 0)
        : seed_(seed), base_(detail::mix64(seed + detail::kGolden * (stream + 1)) ^ stream) {}

    uint64_t next_u64() {
        return detail::mix64(base_ + (++cursor_) * detail::kGolden);
    }

    // Uniform double in [0, 1).
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; consumes exactly two draws.
    double next_gaussian() {
        double u1 = 1.0 - next_uniform();
        double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    RngStream fork(uint64_t child) const {
        RngStream s(0);
        s.seed_ = seed_;
        s.base_ = detail::mix64(base_ ^ detail::mix64(child + 0x5851F42D4C957F2Dull));
        return s;
    }

    uint64_t seed() const { return seed_; }
    uint64_t cursor() const { return cursor_; }

    static RngStream at_cursor(uint64_t seed, uint64_t cursor) {
        RngStream s(seed);
        s.cursor_ = cursor;
        return s;
    }

  private:
    uint64_t seed_ = 0;
    uint64_t base_ = 0;
    uint64_t cursor_ = 0;
};

// Runs fn(i) for i in [0, n) across worker threads. Work is striped by
// index; callers write results into per-index slots and reduce afterwards
// in index order, so results do not depend on the thread count.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

}  // namespace drafter
