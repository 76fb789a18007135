#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "random_volumes.hpp"
#include "toposculpt/kernels.hpp"

using namespace toposculpt;
namespace k = toposculpt::kernels;

namespace {

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::vector<double> random_values(PhantomRng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("serial and parallel pooling are bit-identical") {
    PhantomRng rng(4);
    for (int trial = 0; trial < 40; ++trial) {
        const Dims d = testing_support::random_dims(rng, 17);
        const auto in = random_values(rng, d.count(), 0, 1);
        for (auto shape : {k::Pooling::separable3, k::Pooling::cubic3}) {
            for (auto op : {k::PoolOp::min, k::PoolOp::max}) {
                std::vector<double> a(in.size()), b(in.size());
                k::serial::pool(in, a, d, shape, op);
                k::parallel::pool(in, b, d, shape, op);
                CHECK(bit_equal(a, b));
            }
        }
    }
}

TEST_CASE("serial and parallel sigmoid and box mean are bit-identical") {
    PhantomRng rng(6);
    for (int trial = 0; trial < 40; ++trial) {
        const Dims d = testing_support::random_dims(rng, 17);
        const auto in = random_values(rng, d.count(), -20, 20);
        std::vector<double> a(in.size()), b(in.size());
        k::serial::sigmoid(in, a);
        k::parallel::sigmoid(in, b);
        CHECK(bit_equal(a, b));
        k::serial::box_mean3(in, a, d);
        k::parallel::box_mean3(in, b, d);
        CHECK(bit_equal(a, b));
    }
}

TEST_CASE("pool matches a direct window scan") {
    PhantomRng rng(12);
    const Dims d{5, 4, 3};
    const auto in = random_values(rng, d.count(), 0, 1);
    std::vector<double> out(in.size());
    k::serial::pool(in, out, d, k::Pooling::cubic3, k::PoolOp::max);
    for (std::size_t i = 0; i < in.size(); ++i) {
        const VoxelCoord c = coord_of(i, d);
        double best = -1;
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const VoxelCoord u{std::clamp<std::int64_t>(c.x + dx, 0, d.nx - 1),
                                       std::clamp<std::int64_t>(c.y + dy, 0, d.ny - 1),
                                       std::clamp<std::int64_t>(c.z + dz, 0, d.nz - 1)};
                    best = std::max(best, in[static_cast<std::size_t>(u.x + d.nx * (u.y + d.ny * u.z))]);
                }
        CHECK(out[i] == best);
    }
}

TEST_CASE("exact distance transform equals brute force under anisotropic spacing") {
    PhantomRng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const Dims d = testing_support::random_dims(rng, 9);
        const Spacing s{rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0)};
        std::vector<unsigned char> feature(d.count());
        for (auto& f : feature) f = rng.uniform() < 0.1 ? 1 : 0;
        std::vector<double> a(d.count()), b(d.count());
        k::serial::squared_edt(feature, a, d, s);
        k::parallel::squared_edt(feature, b, d, s);
        CHECK(bit_equal(a, b));
        for (std::size_t i = 0; i < d.count(); ++i) {
            const VoxelCoord c = coord_of(i, d);
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < d.count(); ++j) {
                if (!feature[j]) continue;
                const VoxelCoord u = coord_of(j, d);
                const double dx = static_cast<double>(c.x - u.x) * s.x;
                const double dy = static_cast<double>(c.y - u.y) * s.y;
                const double dz = static_cast<double>(c.z - u.z) * s.z;
                best = std::min(best, dx * dx + dy * dy + dz * dz);
            }
            if (std::isinf(best)) {
                CHECK(std::isinf(a[i]));
            } else {
                CHECK(a[i] == doctest::Approx(best).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("thread cap is honoured") {
    const int before = k::thread_count();
    k::set_thread_count(1);
    CHECK(k::thread_count() == 1);
    k::set_thread_count(before);
    CHECK(k::thread_count() == before);
}

}  // TEST_SUITE
