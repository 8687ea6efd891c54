#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drafter/common.hpp"

namespace drafter {

// Dense row-major matrix of doubles with an optional name. Parameters,
// gradients and per-position activations all use this one type; vectors
// are 1 x n.
struct Tensor {
    std::string name;
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::string n, int r, int c) : name(std::move(n)), rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    int64_t count() const { return static_cast<int64_t>(rows) * cols; }

    Tensor zeros_like() const { return Tensor(name, rows, cols); }
};

using ParamList = std::vector<Tensor>;

// Elementwise helpers over a whole parameter list. Shapes must match
// tensor-for-tensor.
ParamList zeros_like(const ParamList& params);
void add_scaled(ParamList& dst, const ParamList& src, double scale);
void scale(ParamList& params, double factor);
double global_norm(const ParamList& params);
bool all_finite(const ParamList& params);
int64_t total_count(const ParamList& params);

}  // namespace drafter
