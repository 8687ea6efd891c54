#pragma once

#include <cstdint>
#include <vector>

#include "drafter/common.hpp"

namespace drafter {

using TokenId = int32_t;

// Categorical distribution over a token vocabulary. Entries are
// non-negative and sum to 1 within kSumTol.
struct Dist {
    std::vector<double> probs;

    int size() const { return static_cast<int>(probs.size()); }
    double operator[](TokenId t) const { return probs[static_cast<size_t>(t)]; }

    static constexpr double kSumTol = 1e-9;
    // Throws ValidationError if the invariants do not hold.
    void validate() const;
};

struct SamplingConfig {
    double temperature = 1.0;  // 0 means greedy (argmax, lowest index wins ties)
    double top_p = 1.0;        // nucleus mass in (0, 1]
    uint64_t seed = 0;
};

// Normalizes non-negative weights into a Dist.
Dist make_dist(const std::vector<double>& weights);

// temperature > 0: softmax(logits / temperature).
// temperature = 0: one-hot at the argmax, ties broken by lowest index.
Dist apply_temperature(const std::vector<double>& logits, double temperature);

// Nucleus filter: keep the smallest set of highest-probability tokens whose
// cumulative mass reaches top_p (descending order, ties by lowest index, the
// boundary token included), zero the rest and renormalize.
Dist top_p_filter(const Dist& d, double top_p);

enum class KlDirection {
    forward,  // teacher leading: sum_x q(x) log(q(x)/p(x))
    reverse,  // student leading: sum_x p(x) log(p(x)/q(x))
};

// Total variation distance, 0.5 * sum |q - p| = 1 - sum min(p, q).
double tvd(const Dist& p, const Dist& q);

// KL divergence with 0 log(0/.) = 0; returns +infinity when the leading
// distribution has mass where the other has none.
double kld(const Dist& p, const Dist& q, KlDirection dir = KlDirection::forward);

// Normalized max(q - p, 0); the normalizer equals tvd(p, q). Errors when
// p == q: rejection has probability zero there, so reaching this is a
// caller bug.
Dist residual_dist(const Dist& p, const Dist& q);

// Inverse-CDF lookup in token-index order for a given uniform draw.
TokenId sample_with_uniform(const Dist& d, double u);

// Draws one uniform from rng and samples d.
TokenId sample(const Dist& d, RngStream& rng);

}  // namespace drafter
