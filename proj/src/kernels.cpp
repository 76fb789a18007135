#include "toposculpt/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace toposculpt::kernels {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline double combine(double a, double b, PoolOp op) noexcept {
    return op == PoolOp::min ? std::min(a, b) : std::max(a, b);
}

// Cross-shaped window at one voxel. Out-of-range neighbors are skipped, which is
// exactly replicate padding for min/max.
inline double cross_at(const double* in, const Dims& d, std::int64_t x, std::int64_t y, std::int64_t z,
                       PoolOp op) noexcept {
    const std::int64_t sx = 1;
    const std::int64_t sy = d.nx;
    const std::int64_t sz = d.nx * d.ny;
    const std::int64_t i = x + sy * y + sz * z;
    double acc = in[i];
    if (x > 0) acc = combine(acc, in[i - sx], op);
    if (x + 1 < d.nx) acc = combine(acc, in[i + sx], op);
    if (y > 0) acc = combine(acc, in[i - sy], op);
    if (y + 1 < d.ny) acc = combine(acc, in[i + sy], op);
    if (z > 0) acc = combine(acc, in[i - sz], op);
    if (z + 1 < d.nz) acc = combine(acc, in[i + sz], op);
    return acc;
}

// One 3-tap pass along `axis` (0,1,2) for the row/plane starting at the given voxel.
inline double line3_at(const double* in, const Dims& d, std::int64_t x, std::int64_t y, std::int64_t z, int axis,
                       PoolOp op) noexcept {
    const std::int64_t i = x + d.nx * (y + d.ny * z);
    std::int64_t stride = 1;
    std::int64_t pos = x;
    std::int64_t n = d.nx;
    if (axis == 1) {
        stride = d.nx;
        pos = y;
        n = d.ny;
    } else if (axis == 2) {
        stride = d.nx * d.ny;
        pos = z;
        n = d.nz;
    }
    double acc = in[i];
    if (pos > 0) acc = combine(acc, in[i - stride], op);
    if (pos + 1 < n) acc = combine(acc, in[i + stride], op);
    return acc;
}

inline std::int64_t clamp_idx(std::int64_t v, std::int64_t n) noexcept { return std::clamp<std::int64_t>(v, 0, n - 1); }

inline double box_at(const double* in, const Dims& d, std::int64_t x, std::int64_t y, std::int64_t z) noexcept {
    // Fixed summation order so serial and parallel agree bit for bit.
    double acc = 0.0;
    for (int dz = -1; dz <= 1; ++dz) {
        const std::int64_t zz = clamp_idx(z + dz, d.nz);
        for (int dy = -1; dy <= 1; ++dy) {
            const std::int64_t yy = clamp_idx(y + dy, d.ny);
            for (int dx = -1; dx <= 1; ++dx) {
                const std::int64_t xx = clamp_idx(x + dx, d.nx);
                acc += in[xx + d.nx * (yy + d.ny * zz)];
            }
        }
    }
    return acc / 27.0;
}

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) on one line.
// f[i] holds squared distances so far (inf = no site); `w` is the sample spacing.
// Scratch buffers must hold n (v, out) and n+1 (zbound) entries.
void edt_line(double* f, std::int64_t n, std::int64_t stride, double w, std::int64_t* v, double* zbound,
              double* out) {
    std::int64_t k = -1;
    for (std::int64_t q = 0; q < n; ++q) {
        const double fq = f[q * stride];
        if (fq == kInf) continue;
        const double pq = static_cast<double>(q) * w;
        while (k >= 0) {
            const double pv = static_cast<double>(v[k]) * w;
            const double fv = f[v[k] * stride];
            const double s = ((fq + pq * pq) - (fv + pv * pv)) / (2.0 * (pq - pv));
            if (s <= zbound[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        if (k == 0) {
            zbound[0] = -kInf;
        } else {
            const double pv = static_cast<double>(v[k - 1]) * w;
            const double fv = f[v[k - 1] * stride];
            zbound[k] = ((fq + pq * pq) - (fv + pv * pv)) / (2.0 * (pq - pv));
        }
        zbound[k + 1] = kInf;
    }
    if (k < 0) return;  // whole line empty, stays inf
    std::int64_t j = 0;
    for (std::int64_t q = 0; q < n; ++q) {
        const double pq = static_cast<double>(q) * w;
        while (zbound[j + 1] < pq) ++j;
        const double diff = pq - static_cast<double>(v[j]) * w;
        out[q] = diff * diff + f[v[j] * stride];
    }
    for (std::int64_t q = 0; q < n; ++q) f[q * stride] = out[q];
}

void edt_init(std::span<const unsigned char> feature, std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = feature[i] ? 0.0 : kInf;
}

}  // namespace

double sigmoid_scalar(double v) noexcept {
    double s;
    if (v >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-v));
    } else {
        const double e = std::exp(v);
        s = e / (1.0 + e);
    }
    // Saturated values are pulled back inside the open interval.
    constexpr double lo = std::numeric_limits<double>::denorm_min();
    static const double hi = std::nextafter(1.0, 0.0);
    return std::clamp(s, lo, hi);
}

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_thread_count(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

namespace serial {

void pool(std::span<const double> in, std::span<double> out, const Dims& d, Pooling shape, PoolOp op) {
    if (shape == Pooling::separable3) {
        for (std::int64_t z = 0; z < d.nz; ++z)
            for (std::int64_t y = 0; y < d.ny; ++y)
                for (std::int64_t x = 0; x < d.nx; ++x)
                    out[x + d.nx * (y + d.ny * z)] = cross_at(in.data(), d, x, y, z, op);
        return;
    }
    std::vector<double> a(in.begin(), in.end());
    std::vector<double> b(in.size());
    for (int axis = 0; axis < 3; ++axis) {
        for (std::int64_t z = 0; z < d.nz; ++z)
            for (std::int64_t y = 0; y < d.ny; ++y)
                for (std::int64_t x = 0; x < d.nx; ++x)
                    b[x + d.nx * (y + d.ny * z)] = line3_at(a.data(), d, x, y, z, axis, op);
        a.swap(b);
    }
    std::copy(a.begin(), a.end(), out.begin());
}

void sigmoid(std::span<const double> in, std::span<double> out) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = sigmoid_scalar(in[i]);
}

void box_mean3(std::span<const double> in, std::span<double> out, const Dims& d) {
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x) out[x + d.nx * (y + d.ny * z)] = box_at(in.data(), d, x, y, z);
}

void squared_edt(std::span<const unsigned char> feature, std::span<double> out, const Dims& d,
                 const Spacing& sp) {
    edt_init(feature, out);
    const std::int64_t nmax = std::max({d.nx, d.ny, d.nz});
    std::vector<std::int64_t> v(nmax);
    std::vector<double> zb(nmax + 1), tmp(nmax);
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            edt_line(out.data() + d.nx * (y + d.ny * z), d.nx, 1, sp.x, v.data(), zb.data(), tmp.data());
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t x = 0; x < d.nx; ++x)
            edt_line(out.data() + x + d.nx * d.ny * z, d.ny, d.nx, sp.y, v.data(), zb.data(), tmp.data());
    for (std::int64_t y = 0; y < d.ny; ++y)
        for (std::int64_t x = 0; x < d.nx; ++x)
            edt_line(out.data() + x + d.nx * y, d.nz, d.nx * d.ny, sp.z, v.data(), zb.data(), tmp.data());
}

}  // namespace serial

namespace parallel {

void pool(std::span<const double> in, std::span<double> out, const Dims& d, Pooling shape, PoolOp op) {
    if (shape == Pooling::separable3) {
#pragma omp parallel for collapse(2) schedule(static)
        for (std::int64_t z = 0; z < d.nz; ++z)
            for (std::int64_t y = 0; y < d.ny; ++y)
                for (std::int64_t x = 0; x < d.nx; ++x)
                    out[x + d.nx * (y + d.ny * z)] = cross_at(in.data(), d, x, y, z, op);
        return;
    }
    std::vector<double> a(in.begin(), in.end());
    std::vector<double> b(in.size());
    for (int axis = 0; axis < 3; ++axis) {
#pragma omp parallel for collapse(2) schedule(static)
        for (std::int64_t z = 0; z < d.nz; ++z)
            for (std::int64_t y = 0; y < d.ny; ++y)
                for (std::int64_t x = 0; x < d.nx; ++x)
                    b[x + d.nx * (y + d.ny * z)] = line3_at(a.data(), d, x, y, z, axis, op);
        a.swap(b);
    }
    std::copy(a.begin(), a.end(), out.begin());
}

void sigmoid(std::span<const double> in, std::span<double> out) {
    const auto n = static_cast<std::int64_t>(in.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] = sigmoid_scalar(in[i]);
}

void box_mean3(std::span<const double> in, std::span<double> out, const Dims& d) {
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x) out[x + d.nx * (y + d.ny * z)] = box_at(in.data(), d, x, y, z);
}

void squared_edt(std::span<const unsigned char> feature, std::span<double> out, const Dims& d,
                 const Spacing& sp) {
    edt_init(feature, out);
    const std::int64_t nmax = std::max({d.nx, d.ny, d.nz});
#pragma omp parallel
    {
        std::vector<std::int64_t> v(nmax);
        std::vector<double> zb(nmax + 1), tmp(nmax);
#pragma omp for collapse(2) schedule(static)
        for (std::int64_t z = 0; z < d.nz; ++z)
            for (std::int64_t y = 0; y < d.ny; ++y)
                edt_line(out.data() + d.nx * (y + d.ny * z), d.nx, 1, sp.x, v.data(), zb.data(), tmp.data());
#pragma omp for collapse(2) schedule(static)
        for (std::int64_t z = 0; z < d.nz; ++z)
            for (std::int64_t x = 0; x < d.nx; ++x)
                edt_line(out.data() + x + d.nx * d.ny * z, d.ny, d.nx, sp.y, v.data(), zb.data(), tmp.data());
#pragma omp for collapse(2) schedule(static)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x)
                edt_line(out.data() + x + d.nx * y, d.nz, d.nx * d.ny, sp.z, v.data(), zb.data(), tmp.data());
    }
}

}  // namespace parallel

}  // namespace toposculpt::kernels
