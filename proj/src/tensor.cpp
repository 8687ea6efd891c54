#include "drafter/tensor.hpp"

#include <cmath>

namespace drafter {

ParamList zeros_like(const ParamList& params) {
    ParamList out;
    out.reserve(params.size());
    for (const Tensor& t : params) out.push_back(t.zeros_like());
    return out;
}

void add_scaled(ParamList& dst, const ParamList& src, double scale) {
    if (dst.size() != src.size()) throw ValidationError("add_scaled: tensor count mismatch");
    for (size_t i = 0; i < dst.size(); ++i) {
        if (dst[i].count() != src[i].count()) throw ValidationError("add_scaled: shape mismatch at " + dst[i].name);
        for (size_t j = 0; j < dst[i].data.size(); ++j) dst[i].data[j] += scale * src[i].data[j];
    }
}

void scale(ParamList& params, double factor) {
    for (Tensor& t : params) {
        for (double& v : t.data) v *= factor;
    }
}

double global_norm(const ParamList& params) {
    double acc = 0.0;
    for (const Tensor& t : params) {
        for (double v : t.data) acc += v * v;
    }
    return std::sqrt(acc);
}

bool all_finite(const ParamList& params) {
    for (const Tensor& t : params) {
        for (double v : t.data) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

int64_t total_count(const ParamList& params) {
    int64_t n = 0;
    for (const Tensor& t : params) n += t.count();
    return n;
}

}  // namespace drafter
