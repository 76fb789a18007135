#include "toposculpt/soft_skeleton.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

#include "toposculpt/error.hpp"

namespace toposculpt {

namespace {

using Buffer = std::vector<double>;

Buffer pooled(const Buffer& in, const Dims& d, Pooling shape, kernels::PoolOp op) {
    Buffer out(in.size());
    kernels::parallel::pool(in, out, d, shape, op);
    return out;
}

// relu(v - dilate(eroded)), where eroded = erode(v) is supplied by the caller.
Buffer top_hat(const Buffer& v, const Buffer& eroded, const Dims& d, Pooling shape) {
    const Buffer opened = pooled(eroded, d, shape, kernels::PoolOp::max);
    Buffer out(v.size());
    const auto n = static_cast<std::int64_t>(v.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] = std::max(0.0, v[i] - opened[i]);
    return out;
}

}  // namespace

void validate(const SkeletonParams& params) {
    if (params.iterations < 1) throw UsageError("soft skeleton iterations must be >= 1");
}

Volume soft_erode(const Volume& v, Pooling pooling) {
    std::vector<double> out(v.size());
    kernels::parallel::pool(v.values(), out, v.dims(), pooling, kernels::PoolOp::min);
    return Volume(v.dims(), v.spacing(), v.role(), std::move(out));
}

Volume soft_dilate(const Volume& v, Pooling pooling) {
    std::vector<double> out(v.size());
    kernels::parallel::pool(v.values(), out, v.dims(), pooling, kernels::PoolOp::max);
    return Volume(v.dims(), v.spacing(), v.role(), std::move(out));
}

Volume soft_skel(const Volume& v, const SkeletonParams& params) {
    validate(params);
    const Dims& d = v.dims();
    Buffer img(v.values().begin(), v.values().end());
    Buffer eroded = pooled(img, d, params.pooling, kernels::PoolOp::min);
    Buffer skel = top_hat(img, eroded, d, params.pooling);
    const auto n = static_cast<std::int64_t>(img.size());
    for (int it = 0; it < params.iterations; ++it) {
        img.swap(eroded);
        eroded = pooled(img, d, params.pooling, kernels::PoolOp::min);
        const Buffer delta = top_hat(img, eroded, d, params.pooling);
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) skel[i] += std::max(0.0, delta[i] * (1.0 - skel[i]));
    }
    // Keep the tag when it still fits; binary inputs yield fractional skeletons.
    const Role role = v.role() == Role::binary ? Role::probability : v.role();
    return Volume(d, v.spacing(), role, std::move(skel));
}

}  // namespace toposculpt
