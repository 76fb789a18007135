#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "toposculpt/phantom.hpp"
#include "toposculpt/volume.hpp"

namespace testing_support {

using toposculpt::Dims;
using toposculpt::PhantomRng;
using toposculpt::Role;
using toposculpt::Spacing;
using toposculpt::Volume;

inline Dims random_dims(PhantomRng& rng, int max_side) {
    const auto side = [&] { return static_cast<std::int64_t>(1 + rng.below(static_cast<std::uint64_t>(max_side))); };
    return {side(), side(), side()};
}

// Values on a coarse grid so that ties and exact zeros both occur.
inline Volume random_probability(PhantomRng& rng, Dims dims, int levels = 12, double zero_fraction = 0.1) {
    std::vector<double> v(dims.count());
    for (double& x : v) {
        x = rng.uniform() < zero_fraction ? 0.0 : static_cast<double>(1 + rng.below(static_cast<std::uint64_t>(levels))) / levels;
    }
    return Volume(dims, {1, 1, 1}, Role::probability, std::move(v));
}

// Pairwise distinct values, at least 1/(2(n+1)) apart, inside (0, 1).
inline Volume distinct_probability(PhantomRng& rng, Dims dims) {
    const std::size_t n = dims.count();
    std::vector<std::size_t> rank(n);
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(rank[i - 1], rank[rng.below(i)]);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = (static_cast<double>(rank[i] + 1) + 0.5 * rng.uniform()) / static_cast<double>(n + 2);
    }
    return Volume(dims, {1, 1, 1}, Role::probability, std::move(v));
}

inline Volume random_mask(PhantomRng& rng, Dims dims, double density, Spacing spacing = {1, 1, 1}) {
    std::vector<double> v(dims.count());
    for (double& x : v) x = rng.uniform() < density ? 1.0 : 0.0;
    return Volume(dims, spacing, Role::binary, std::move(v));
}

}  // namespace testing_support
