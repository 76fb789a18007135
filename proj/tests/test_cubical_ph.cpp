#include "doctest.h"

#include <algorithm>
#include <chrono>

#include "oracle.hpp"
#include "random_volumes.hpp"
#include "toposculpt/cubical_ph.hpp"
#include "toposculpt/error.hpp"

using namespace toposculpt;

namespace {

Volume example_line() {
    return Volume({1, 1, 4}, {1, 1, 1}, Role::probability, std::vector<double>{0.9, 0.2, 0.8, 0.1});
}

std::vector<std::pair<double, std::size_t>> curve_from_barcode(const Barcode& b, const Volume& p) {
    std::vector<double> levels;
    for (double v : p.values()) {
        if (v > 0.0) levels.push_back(v);
    }
    std::sort(levels.begin(), levels.end(), std::greater<>());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    std::vector<std::pair<double, std::size_t>> out;
    for (double level : levels) out.emplace_back(level, b.betti0_at_level(level));
    return out;
}

}  // namespace

TEST_SUITE("cubical_ph") {

TEST_CASE("four-voxel line pairs by the elder rule") {
    const Volume p = example_line();
    const Barcode b = compute_ph0(p);
    REQUIRE(b.size() == 2);
    CHECK(b.pairs[0].essential);
    CHECK(b.pairs[0].birth == 0.9);
    CHECK(b.pairs[0].death == 0.0);
    CHECK(p.index(b.pairs[0].birth_voxel) == 0);
    CHECK_FALSE(b.pairs[0].death_voxel.has_value());
    CHECK_FALSE(b.pairs[1].essential);
    CHECK(b.pairs[1].birth == 0.8);
    CHECK(b.pairs[1].death == 0.2);
    CHECK(p.index(b.pairs[1].birth_voxel) == 2);
    REQUIRE(b.pairs[1].death_voxel.has_value());
    CHECK(p.index(*b.pairs[1].death_voxel) == 1);
}

TEST_CASE("degenerate supports") {
    CHECK(compute_ph0(Volume({3, 3, 3}, {1, 1, 1}, Role::probability, 0.0)).empty());
    Volume single({3, 3, 3}, {1, 1, 1}, Role::probability, 0.0);
    single.at({1, 2, 0}) = 0.4;
    const Barcode b = compute_ph0(single);
    REQUIRE(b.size() == 1);
    CHECK(b.pairs[0].essential);
    CHECK(b.pairs[0].birth == 0.4);
    CHECK(b.pairs[0].birth_voxel == VoxelCoord{1, 2, 0});
    CHECK_THROWS_AS(compute_ph0(Volume({0, 0, 0}, {1, 1, 1}, Role::probability, 0.0)), InputError);
    CHECK_THROWS_AS(compute_ph0(Volume({2, 1, 1}, {1, 1, 1}, Role::logit, 0.0)), InputError);
}

TEST_CASE("betti0_at by flood fill") {
    Volume corners({4, 4, 4}, {1, 1, 1}, Role::probability, 0.0);
    corners.at({0, 0, 0}) = 0.9;
    corners.at({3, 3, 3}) = 0.9;
    CHECK(betti0_at(corners, 0.5) == 2);
    CHECK(betti0_at(example_line(), 0.5) == 2);
    CHECK(betti0_at(example_line(), 0.15) == 1);
}

TEST_CASE("oracle curve examples") {
    Volume one({1, 1, 1}, {1, 1, 1}, Role::probability, 0.7);
    CHECK(oracle::betti_curve(one, Connectivity::vertex) == std::vector<std::pair<double, std::size_t>>{{0.7, 1}});
    CHECK(oracle::betti_curve(example_line(), Connectivity::vertex) ==
          std::vector<std::pair<double, std::size_t>>{{0.9, 1}, {0.8, 2}, {0.2, 1}, {0.1, 1}});
    Volume constant({3, 2, 2}, {1, 1, 1}, Role::probability, 0.3);
    CHECK(oracle::betti_curve(constant, Connectivity::face) == std::vector<std::pair<double, std::size_t>>{{0.3, 1}});
    CHECK_THROWS(oracle::betti_curve(Volume({33, 32, 32}, {1, 1, 1}, Role::probability, 0.1), Connectivity::face));
}

TEST_CASE("barcode curve equals the flood-fill oracle for every connectivity") {
    PhantomRng rng(2024);
    for (int trial = 0; trial < 150; ++trial) {
        const Volume p = testing_support::random_probability(rng, testing_support::random_dims(rng, 6), 8, 0.2);
        for (Connectivity conn : {Connectivity::face, Connectivity::edge, Connectivity::vertex}) {
            const Barcode b = compute_ph0(p, conn);
            CHECK(curve_from_barcode(b, p) == oracle::betti_curve(p, conn));
        }
    }
}

TEST_CASE("critical voxels hold their values and pairs are well formed") {
    PhantomRng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const Volume p = testing_support::random_probability(rng, testing_support::random_dims(rng, 6), 20, 0.1);
        const Barcode b = compute_ph0(p);
        std::size_t essentials = 0;
        for (const auto& pair : b.pairs) {
            CHECK(p.at(pair.birth_voxel) == pair.birth);
            if (pair.essential) {
                ++essentials;
                CHECK(pair.death == 0.0);
                CHECK_FALSE(pair.death_voxel.has_value());
            } else {
                REQUIRE(pair.death_voxel.has_value());
                CHECK(p.at(*pair.death_voxel) == pair.death);
                CHECK(pair.birth > pair.death);
            }
        }
        // one essential class per component of the support
        Volume support = p;
        CHECK(essentials == count_components(binarize(support, 1e-12), Connectivity::vertex));
        if (!b.empty()) {
            CHECK(b.pairs[0].essential);
            CHECK(b.pairs[0].birth == *std::max_element(p.values().begin(), p.values().end()));
        }
    }
}

TEST_CASE("barcode order is persistence, then birth, then birth voxel") {
    PhantomRng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const Volume p = testing_support::random_probability(rng, testing_support::random_dims(rng, 6), 6, 0.3);
        const Barcode b = compute_ph0(p);
        for (std::size_t i = 1; i < b.size(); ++i) {
            const auto& a = b.pairs[i - 1];
            const auto& c = b.pairs[i];
            const bool ordered = a.persistence() > c.persistence() ||
                                 (a.persistence() == c.persistence() &&
                                  (a.birth > c.birth || (a.birth == c.birth && a.birth_voxel < c.birth_voxel)));
            CHECK(ordered);
        }
    }
}

TEST_CASE("recomputation is deterministic") {
    PhantomRng rng(8);
    const Volume p = testing_support::random_probability(rng, {12, 10, 9}, 5, 0.1);
    const Barcode a = compute_ph0(p);
    const Barcode b = compute_ph0(p);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.pairs[i].birth == b.pairs[i].birth);
        CHECK(a.pairs[i].death == b.pairs[i].death);
        CHECK(a.pairs[i].birth_voxel == b.pairs[i].birth_voxel);
        CHECK(a.pairs[i].death_voxel == b.pairs[i].death_voxel);
    }
}

TEST_CASE("betti0_at matches pairs alive across the threshold") {
    PhantomRng rng(19);
    for (int trial = 0; trial < 100; ++trial) {
        const Volume p = testing_support::random_probability(rng, testing_support::random_dims(rng, 6), 10, 0.1);
        const Barcode b = compute_ph0(p);
        for (double thr : {0.15, 0.35, 0.5, 0.73}) {
            std::size_t alive = 0;
            for (const auto& pair : b.pairs) alive += (pair.birth > thr && thr >= pair.death) ? 1 : 0;
            CHECK(betti0_at(p, thr) == alive);
        }
    }
}

TEST_CASE("a 128^3 random volume finishes within a generous bound") {
    PhantomRng rng(1);
    std::vector<double> v(128 * 128 * 128);
    for (double& x : v) x = rng.uniform();
    const Volume p({128, 128, 128}, {1, 1, 1}, Role::probability, std::move(v));
    const auto t0 = std::chrono::steady_clock::now();
    const Barcode b = compute_ph0(p);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(b.size() > 0);
    CHECK(s < 20.0);
}

}  // TEST_SUITE
