#include "doctest.h"

#include <cmath>

#include "oracle.hpp"
#include "random_volumes.hpp"
#include "toposculpt/error.hpp"
#include "toposculpt/tib_loss.hpp"

using namespace toposculpt;

namespace {

PersistencePair finite_pair(double birth, double death, std::int64_t x) {
    PersistencePair p;
    p.birth = birth;
    p.death = death;
    p.birth_voxel = {x, 0, 0};
    p.death_voxel = VoxelCoord{x, 1, 0};
    return p;
}

Barcode barcode_of(std::initializer_list<double> persistences) {
    Barcode b;
    std::int64_t x = 0;
    for (double p : persistences) b.pairs.push_back(finite_pair(p, 0.0, x++));
    return b;
}

std::vector<double> persistences(const std::vector<PersistencePair>& v) {
    std::vector<double> out;
    for (const auto& p : v) out.push_back(p.persistence());
    return out;
}

// Binary tube along z through the centre of an 11x11x16 grid.
Volume tube_mask() {
    Volume v({11, 11, 16}, {1, 1, 1}, Role::probability, 0.0);
    for (std::int64_t z = 2; z < 14; ++z)
        for (std::int64_t y = 3; y <= 7; ++y)
            for (std::int64_t x = 3; x <= 7; ++x)
                if ((x - 5) * (x - 5) + (y - 5) * (y - 5) <= 4) v.at({x, y, z}) = 1.0;
    return v;
}

Volume scaled(const Volume& v, double s) {
    Volume out = v;
    for (double& x : out.values()) x *= s;
    return out;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_SUITE("tib_loss") {

TEST_CASE("feature split keeps the prior's count of most persistent pairs") {
    auto s = split_features(barcode_of({0.9, 0.6, 0.2}), TopoPrior{1});
    CHECK(persistences(s.faithful) == std::vector<double>{0.9});
    CHECK(persistences(s.superfluous) == std::vector<double>{0.6, 0.2});
    s = split_features(barcode_of({0.5}), TopoPrior{1});
    CHECK(s.faithful.size() == 1);
    CHECK(s.superfluous.empty());
    s = split_features(barcode_of({0.8, 0.7, 0.1}), TopoPrior{2});
    CHECK(persistences(s.faithful) == std::vector<double>{0.8, 0.7});
    CHECK(persistences(s.superfluous) == std::vector<double>{0.1});
    s = split_features(Barcode{}, TopoPrior{1});
    CHECK(s.faithful.empty());
    CHECK(s.superfluous.empty());
}

TEST_CASE("correction term on the four-voxel line") {
    const Volume p({1, 1, 4}, {1, 1, 1}, Role::probability, std::vector<double>{0.9, 0.2, 0.8, 0.1});
    const CorrectionTerm c = l_tib_cor(compute_ph0(p), TopoPrior{1});
    CHECK(c.loss == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(c.grads.size() == 3);
    CHECK(c.grads.at(VoxelCoord{0, 0, 0}) == -1.0);
    CHECK(c.grads.at(VoxelCoord{0, 0, 2}) == 1.0);
    CHECK(c.grads.at(VoxelCoord{0, 0, 1}) == -1.0);
    CHECK_FALSE(c.vacuous);
}

TEST_CASE("correction term at the ideal and on an empty barcode") {
    Volume p({3, 3, 3}, {1, 1, 1}, Role::probability, 0.0);
    p.at({1, 1, 1}) = 1.0;
    const CorrectionTerm ideal = l_tib_cor(compute_ph0(p), TopoPrior{1});
    CHECK(ideal.loss == 0.0);
    CHECK(ideal.grads.size() == 1);
    CHECK(ideal.grads.at(VoxelCoord{1, 1, 1}) == -1.0);
    const CorrectionTerm empty = l_tib_cor(Barcode{}, TopoPrior{1});
    CHECK(empty.loss == 1.0);
    CHECK(empty.grads.empty());
    CHECK(empty.vacuous);
    CHECK_THROWS_AS(l_tib_cor(Barcode{}, TopoPrior{0}), UsageError);
}

TEST_CASE("correction term is non-negative and zero only at the prior") {
    PhantomRng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const Volume p = testing_support::random_probability(rng, testing_support::random_dims(rng, 6), 10, 0.2);
        const Barcode b = compute_ph0(p);
        for (int beta0 : {1, 2, 3}) {
            const double loss = l_tib_cor(b, TopoPrior{beta0}).loss;
            CHECK(loss >= 0.0);
            bool ideal = b.size() == static_cast<std::size_t>(beta0);
            for (const auto& pr : b.pairs) ideal = ideal && pr.persistence() == 1.0;
            CHECK((loss == 0.0) == ideal);
        }
    }
}

TEST_CASE("structural similarity examples") {
    const Volume tube = tube_mask();
    const SkeletonParams params{2, Pooling::separable3};
    const StructuralSimilarity same = struc_similarity(tube, tube, params);
    CHECK(same.precision == 1.0);
    CHECK(same.sensitivity == 1.0);
    CHECK(same.f_score == 1.0);
    CHECK_FALSE(same.degenerate);

    const StructuralSimilarity soft = struc_similarity(scaled(tube, 0.8), tube, params);
    CHECK(soft.precision == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(soft.sensitivity == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(soft.f_score == doctest::Approx(2.0 * 0.8 / 1.8).epsilon(1e-15));

    const Volume faint({11, 11, 16}, {1, 1, 1}, Role::probability, 1e-12);
    const StructuralSimilarity degenerate = struc_similarity(tube, faint, params);
    CHECK(degenerate.degenerate);
    CHECK(degenerate.f_score == 0.0);
}

TEST_CASE("structural f-score is bounded and maximal against itself") {
    PhantomRng rng(23);
    const SkeletonParams params{2, Pooling::separable3};
    for (int trial = 0; trial < 30; ++trial) {
        const Volume p = testing_support::random_mask(rng, {6, 6, 6}, 0.5).retagged(Role::probability);
        const double self = struc_similarity(p, p, params).f_score;
        // q shares p's binarization, hence its skeleton support
        Volume q = p;
        for (double& x : q.values()) x = x > 0.5 ? rng.uniform(0.51, 1.0) : rng.uniform(0.0, 0.5);
        const StructuralSimilarity s = struc_similarity(p, q, params);
        CHECK(s.f_score >= 0.0);
        CHECK(s.f_score <= 1.0);
        CHECK(s.f_score <= self);
    }
}

TEST_CASE("integrity term examples") {
    const Volume tube = tube_mask();
    const SkeletonParams params{2, Pooling::separable3};
    const IntegrityTerm full = l_tib_com(tube, tube, TibWeights{1e4, 1e3, 0.1}, params);
    CHECK(full.value == -1000.0);
    CHECK(full.voxel == 0.0);

    PhantomRng rng(2);
    const Volume p = testing_support::random_probability(rng, {4, 4, 4});
    const IntegrityTerm flat = l_tib_com(p, p, TibWeights{1e4, 0.0, 0.1}, params);
    CHECK(flat.value == 0.0);
    for (double g : flat.grad) CHECK(g == 0.0);

    const Volume next({1, 1, 1}, {1, 1, 1}, Role::probability, 0.6);
    const Volume prev({1, 1, 1}, {1, 1, 1}, Role::probability, 0.4);
    const IntegrityTerm one = l_tib_com(next, prev, TibWeights{1.0, 0.0, 0.1}, params);
    CHECK(one.value == doctest::Approx(0.04).epsilon(1e-14));
    CHECK(one.grad[0] == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("total loss composes both terms with the phase weight") {
    const Volume tube = tube_mask();
    const SkeletonParams params{2, Pooling::separable3};
    const TibWeights w{1e4, 1e3, 0.1};
    Volume ideal = tube;
    const Barcode b = compute_ph0(ideal);
    REQUIRE(b.size() == 1);
    const TibLossReport dense = l_tib_total(b, TopoPrior{1}, ideal, ideal, w, params, 1.0);
    CHECK(dense.l_total == -1000.0);
    const TibLossReport late = l_tib_total(b, TopoPrior{1}, ideal, ideal, w, params, 0.1);
    CHECK(late.l_total == doctest::Approx(-100.0).epsilon(1e-15));

    // l_cor 0.7 from the four-voxel line, integrity parts from a shifted map
    const Volume line({1, 1, 4}, {1, 1, 1}, Role::probability, std::vector<double>{0.9, 0.2, 0.8, 0.1});
    const Volume prev({1, 1, 4}, {1, 1, 1}, Role::probability, std::vector<double>{0.7, 0.3, 0.6, 0.2});
    for (double g : {1.0, 0.1}) {
        const TibLossReport r = l_tib_total(compute_ph0(line), TopoPrior{1}, line, prev, w, params, g);
        CHECK(r.l_cor == doctest::Approx(0.7).epsilon(1e-15));
        CHECK(r.l_total == doctest::Approx(r.l_cor + g * (r.l_com_voxel + r.l_com_struct)).epsilon(1e-15));
        const IntegrityTerm com = l_tib_com(line, prev, w, params);
        const CorrectionTerm cor = l_tib_cor(compute_ph0(line), TopoPrior{1});
        for (std::size_t i = 0; i < line.size(); ++i) {
            const auto it = cor.grads.find(line.coord(i));
            const double expected = g * com.grad[i] + (it == cor.grads.end() ? 0.0 : it->second);
            CHECK(r.gradient[i] == doctest::Approx(expected).epsilon(1e-15));
        }
    }
    CHECK(0.7 + 1.0 * -999.96 == doctest::Approx(-999.26).epsilon(1e-14));
    CHECK(0.7 + 0.1 * -999.96 == doctest::Approx(-99.296).epsilon(1e-14));
}

TEST_CASE("correction subgradients match central differences at critical voxels") {
    PhantomRng rng(101);
    const double eps = 1e-5;
    for (int trial = 0; trial < 50; ++trial) {
        const Volume p = testing_support::distinct_probability(rng, testing_support::random_dims(rng, 8));
        const CorrectionTerm c = l_tib_cor(compute_ph0(p), TopoPrior{1});
        const auto loss_at = [&](const std::vector<double>& x) {
            return l_tib_cor(compute_ph0(Volume(p.dims(), p.spacing(), Role::probability, x)), TopoPrior{1}).loss;
        };
        const std::vector<double> x(p.values().begin(), p.values().end());
        for (const auto& [voxel, g] : c.grads) {
            const double fd = oracle::central_difference(loss_at, x, p.index(voxel), eps);
            CHECK(rel_err(fd, g) <= 1e-6);
        }
    }
}

TEST_CASE("voxel and structural gradients match central differences") {
    PhantomRng rng(202);
    const double eps = 1e-5;
    const SkeletonParams params{2, Pooling::separable3};
    for (int trial = 0; trial < 50; ++trial) {
        const Dims d = testing_support::random_dims(rng, 8);
        const Volume next = testing_support::distinct_probability(rng, d);
        const Volume prev = testing_support::distinct_probability(rng, d);
        const Volume skel_next = structural_skeleton(next, params);
        const Volume skel_prev = structural_skeleton(prev, params);
        const TibWeights w{1e4, 0.0, 0.1};
        const IntegrityTerm com = l_tib_com(next, skel_next, prev, skel_prev, w);
        const auto voxel_at = [&](const std::vector<double>& x) {
            return l_tib_com(Volume(d, next.spacing(), Role::probability, x), skel_next, prev, skel_prev, w).value;
        };
        const auto f_at = [&](const std::vector<double>& x) {
            return struc_similarity(Volume(d, next.spacing(), Role::probability, x), skel_next, prev, skel_prev).f_score;
        };
        const StructuralSimilarity sim = struc_similarity(next, skel_next, prev, skel_prev);
        const std::vector<double> x(next.values().begin(), next.values().end());
        for (int s = 0; s < 100; ++s) {
            const std::size_t i = rng.below(x.size());
            CHECK(rel_err(oracle::central_difference(voxel_at, x, i, eps), com.grad[i]) <= 1e-6);
            if (!sim.degenerate && sim.grad[i] != 0.0) {
                const double fd = oracle::central_difference(f_at, x, i, eps);
                CHECK(std::abs(fd - sim.grad[i]) <= 1e-6 * std::max(1.0, std::abs(sim.grad[i])));
            }
        }
    }
}

}  // TEST_SUITE
