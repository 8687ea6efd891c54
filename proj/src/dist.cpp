#include "drafter/dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace drafter {

void Dist::validate() const {
    if (probs.empty()) throw ValidationError("Dist: empty probability vector");
    double sum = 0.0;
    for (double p : probs) {
        if (!std::isfinite(p)) throw ValidationError("Dist: non-finite entry");
        if (p < 0.0) throw ValidationError("Dist: negative entry");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kSumTol) {
        throw ValidationError("Dist: entries sum to " + std::to_string(sum));
    }
}

Dist make_dist(const std::vector<double>& weights) {
    if (weights.empty()) throw ValidationError("make_dist: empty weights");
    double sum = 0.0;
    for (double w : weights) {
        if (!std::isfinite(w)) throw ValidationError("make_dist: non-finite weight");
        if (w < 0.0) throw ValidationError("make_dist: negative weight");
        sum += w;
    }
    if (sum <= 0.0) throw ValidationError("make_dist: all weights are zero");
    Dist d;
    d.probs.resize(weights.size());
    for (size_t i = 0; i < weights.size(); ++i) d.probs[i] = weights[i] / sum;
    return d;
}

Dist apply_temperature(const std::vector<double>& logits, double temperature) {
    if (logits.empty()) throw ValidationError("apply_temperature: empty logits");
    if (temperature < 0.0 || !std::isfinite(temperature)) {
        throw ValidationError("apply_temperature: bad temperature");
    }
    for (double z : logits) {
        if (!std::isfinite(z)) throw ValidationError("apply_temperature: non-finite logit");
    }
    Dist d;
    d.probs.assign(logits.size(), 0.0);
    if (temperature == 0.0) {
        size_t best = 0;
        for (size_t i = 1; i < logits.size(); ++i) {
            if (logits[i] > logits[best]) best = i;
        }
        d.probs[best] = 1.0;
        return d;
    }
    double maxz = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        d.probs[i] = std::exp((logits[i] - maxz) / temperature);
        sum += d.probs[i];
    }
    for (double& p : d.probs) p /= sum;
    return d;
}

Dist top_p_filter(const Dist& d, double top_p) {
    if (!(top_p > 0.0) || top_p > 1.0) throw ValidationError("top_p_filter: top_p out of (0,1]");
    d.validate();
    const int n = d.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (d.probs[a] != d.probs[b]) return d.probs[a] > d.probs[b];
        return a < b;
    });
    double cum = 0.0;
    double kept = 0.0;
    std::vector<char> keep(n, 0);
    for (int idx : order) {
        keep[idx] = 1;
        cum += d.probs[idx];
        kept += d.probs[idx];
        if (cum >= top_p) break;
    }
    Dist out;
    out.probs.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        if (keep[i]) out.probs[i] = d.probs[i] / kept;
    }
    return out;
}

double tvd(const Dist& p, const Dist& q) {
    if (p.size() != q.size()) throw ValidationError("tvd: size mismatch");
    double acc = 0.0;
    for (int i = 0; i < p.size(); ++i) acc += std::abs(q.probs[i] - p.probs[i]);
    return 0.5 * acc;
}

double kld(const Dist& p, const Dist& q, KlDirection dir) {
    if (p.size() != q.size()) throw ValidationError("kld: size mismatch");
    const Dist& lead = (dir == KlDirection::forward) ? q : p;
    const Dist& other = (dir == KlDirection::forward) ? p : q;
    double acc = 0.0;
    for (int i = 0; i < p.size(); ++i) {
        double a = lead.probs[i];
        if (a == 0.0) continue;
        double b = other.probs[i];
        if (b == 0.0) return std::numeric_limits<double>::infinity();
        acc += a * std::log(a / b);
    }
    return acc;
}

Dist residual_dist(const Dist& p, const Dist& q) {
    if (p.size() != q.size()) throw ValidationError("residual_dist: size mismatch");
    Dist r;
    r.probs.resize(p.size());
    double mass = 0.0;
    for (int i = 0; i < p.size(); ++i) {
        r.probs[i] = std::max(q.probs[i] - p.probs[i], 0.0);
        mass += r.probs[i];
    }
    if (mass <= 0.0) throw ValidationError("residual_dist: zero residual mass (p == q)");
    for (double& v : r.probs) v /= mass;
    return r;
}

TokenId sample_with_uniform(const Dist& d, double u) {
    double cum = 0.0;
    int last_support = -1;
    for (int i = 0; i < d.size(); ++i) {
        if (d.probs[i] <= 0.0) continue;
        last_support = i;
        cum += d.probs[i];
        if (u < cum) return i;
    }
    // u fell into the rounding slack past the last positive entry.
    if (last_support < 0) throw ValidationError("sample: distribution has no support");
    return last_support;
}

TokenId sample(const Dist& d, RngStream& rng) {
    return sample_with_uniform(d, rng.next_uniform());
}

}  // namespace drafter
