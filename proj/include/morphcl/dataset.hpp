#pragma once

#include <cstdint>
#include <vector>

#include "morphcl/matrix.hpp"
#include "morphcl/rng.hpp"

namespace morphcl {

// A task's samples: inputs, targets (values or one-hot rows), task id.
struct Dataset {
    Matrix x;
    Matrix y;
    int task_id = -1;

    std::size_t size() const { return x.rows(); }
    bool empty() const { return x.rows() == 0; }
};

inline Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.task_id = ds.task_id;
    out.x = Matrix(idx.size(), ds.x.cols());
    out.y = Matrix(idx.size(), ds.y.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t c = 0; c < ds.x.cols(); ++c) out.x(i, c) = ds.x(idx[i], c);
        for (std::size_t c = 0; c < ds.y.cols(); ++c) out.y(i, c) = ds.y(idx[i], c);
    }
    return out;
}

inline Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.empty()) return b;
    if (b.empty()) return a;
    detail::require(a.x.cols() == b.x.cols() && a.y.cols() == b.y.cols(),
                    "concat: column counts disagree");
    Dataset out;
    out.task_id = -1;
    out.x = Matrix(a.size() + b.size(), a.x.cols());
    out.y = Matrix(a.size() + b.size(), a.y.cols());
    for (std::size_t r = 0; r < a.size(); ++r) {
        for (std::size_t c = 0; c < a.x.cols(); ++c) out.x(r, c) = a.x(r, c);
        for (std::size_t c = 0; c < a.y.cols(); ++c) out.y(r, c) = a.y(r, c);
    }
    for (std::size_t r = 0; r < b.size(); ++r) {
        for (std::size_t c = 0; c < b.x.cols(); ++c) out.x(a.size() + r, c) = b.x(r, c);
        for (std::size_t c = 0; c < b.y.cols(); ++c) out.y(a.size() + r, c) = b.y(r, c);
    }
    return out;
}

// Uniform batch with replacement.
inline Dataset sample_batch(const Dataset& ds, std::size_t batch, std::uint64_t seed) {
    detail::require(!ds.empty(), "sample_batch: empty dataset");
    Rng rng(seed);
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) i = rng.index(ds.size());
    return take_rows(ds, idx);
}

}  // namespace morphcl
