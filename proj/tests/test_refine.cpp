#include "doctest.h"

#include <cmath>
#include <cstring>

#include "random_volumes.hpp"
#include "toposculpt/refine.hpp"

using namespace toposculpt;

namespace {

// A strong elongated blob and a weak 2x2x2 blob. Every voxel of the weak blob
// touches every other one, so lowering its peak can never split it.
Volume two_blobs() {
    Volume p({14, 7, 7}, {1, 1, 1}, Role::probability, 0.05);
    for (std::int64_t z = 2; z <= 4; ++z)
        for (std::int64_t y = 2; y <= 4; ++y)
            for (std::int64_t x = 1; x <= 4; ++x) {
                const double r = std::abs(static_cast<double>(y - 3)) + std::abs(static_cast<double>(z - 3));
                p.at({x, y, z}) = 0.9 - 0.05 * r - 0.01 * static_cast<double>(x);
            }
    for (std::int64_t z = 3; z <= 4; ++z)
        for (std::int64_t y = 3; y <= 4; ++y)
            for (std::int64_t x = 9; x <= 10; ++x) p.at({x, y, z}) = 0.7 - 0.01 * static_cast<double>(x - 9 + 2 * (y - 3) + 4 * (z - 3));
    return p;
}

double weak_blob_max(const Volume& p) {
    double m = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const VoxelCoord c = p.coord(i);
        if (c.x >= 9 && c.x <= 10 && c.y >= 3 && c.y <= 4 && c.z >= 3 && c.z <= 4) m = std::max(m, p[i]);
    }
    return m;
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

RefineSettings small_settings() {
    RefineSettings s;
    s.skeleton.iterations = 2;
    return s;
}

}  // namespace

TEST_SUITE("refine") {

TEST_CASE("init_state maps probabilities to clamped logits") {
    const Volume half({2, 2, 2}, {1, 1, 1}, Role::probability, 0.5);
    const RefinementState h = init_state(half);
    for (double v : h.logits.values()) CHECK(v == 0.0);
    const Volume q({1, 1, 1}, {1, 1, 1}, Role::probability, 0.75);
    CHECK(init_state(q).logits[0] == doctest::Approx(std::log(3.0)).epsilon(1e-15));
    const Volume one({1, 1, 2}, {1, 1, 1}, Role::probability, std::vector<double>{1.0, 0.0});
    const RefinementState s = init_state(one);
    CHECK(s.logits[0] == doctest::Approx(std::log((1 - kInitClamp) / kInitClamp)).epsilon(1e-9));
    CHECK(std::isfinite(s.logits[1]));
    CHECK(s.iteration == 0);
    CHECK(s.trajectory.empty());
}

TEST_CASE("schedule_j is dense then sampled") {
    const CurriculumConfig cfg{30, 90, 3};
    CHECK(schedule_j(30, cfg) == 30);
    CHECK(schedule_j(31, cfg) == 30);
    CHECK(schedule_j(32, cfg) == 30);
    CHECK(schedule_j(33, cfg) == 33);
    for (int i = 0; i <= 90; ++i) {
        CHECK(schedule_j(i, CurriculumConfig{30, 90, 1}) == i);
        CHECK(schedule_j(schedule_j(i, cfg), cfg) == schedule_j(i, cfg));
        CHECK(schedule_j(i, cfg) <= i);
    }
    CHECK(expected_ph_computations(cfg) == 51);
}

TEST_CASE("a full default-curriculum run computes persistence 51 times") {
    PhantomRng rng(5);
    const Volume p0 = testing_support::distinct_probability(rng, {6, 6, 6});
    const RefineResult r = run(p0, small_settings());
    REQUIRE(r.trajectory.size() == 91);
    int flags = 0;
    for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
        const auto& rec = r.trajectory[i];
        CHECK(rec.iteration == static_cast<int>(i));
        const bool expected = rec.iteration <= 30 || rec.iteration % 3 == 0;
        CHECK(rec.ph_recomputed == expected);
        flags += rec.ph_recomputed ? 1 : 0;
    }
    CHECK(flags == 51);
}

TEST_CASE("recomputation count follows the curriculum for other settings") {
    PhantomRng rng(6);
    const Volume p0 = testing_support::distinct_probability(rng, {4, 4, 3});
    for (const CurriculumConfig c : {CurriculumConfig{0, 10, 4}, CurriculumConfig{5, 5, 2}, CurriculumConfig{3, 17, 5}}) {
        RefineSettings s = small_settings();
        s.curriculum = c;
        const RefineResult r = run(p0, s);
        int flags = 0;
        for (const auto& rec : r.trajectory) flags += rec.ph_recomputed ? 1 : 0;
        CHECK(flags == expected_ph_computations(c));
        CHECK(r.trajectory.size() == static_cast<std::size_t>(c.T + 1));
    }
}

TEST_CASE("T = 0 returns the input untouched") {
    PhantomRng rng(7);
    const Volume p0 = testing_support::distinct_probability(rng, {3, 3, 3});
    RefineSettings s = small_settings();
    s.curriculum = {0, 0, 1};
    const RefineResult r = run(p0, s);
    CHECK(r.trajectory.empty());
    CHECK(same_bits(r.refined.values(), p0.values()));
}

TEST_CASE("zero learning rate leaves every iterate bit-identical") {
    PhantomRng rng(8);
    const Volume p0 = testing_support::distinct_probability(rng, {5, 5, 5});
    for (auto method : {OptimizerMethod::adamw, OptimizerMethod::plain_gradient}) {
        RefineSettings s = small_settings();
        s.curriculum = {4, 12, 3};
        s.optimizer.learning_rate = 0.0;
        s.optimizer.method = method;
        RefinementState state = init_state(p0);
        const std::vector<double> theta0(state.logits.values().begin(), state.logits.values().end());
        while (state.iteration < s.curriculum.T) {
            step(state, s);
            CHECK(same_bits(state.logits.values(), theta0));
        }
        for (const auto& rec : state.trajectory) CHECK(rec.beta0 == state.trajectory.front().beta0);
    }
}

TEST_CASE("one step from an ideal state barely moves") {
    Volume p0({6, 6, 6}, {1, 1, 1}, Role::probability, 0.0);
    for (std::int64_t z = 1; z < 5; ++z)
        for (std::int64_t x = 1; x < 5; ++x) p0.at({x, 2, z}) = 1.0;
    RefineSettings s = small_settings();
    RefinementState state = init_state(p0);
    const std::vector<double> theta0(state.logits.values().begin(), state.logits.values().end());
    step(state, s);
    REQUIRE(state.trajectory.size() == 1);
    CHECK(state.trajectory[0].beta0 == 1);
    CHECK(state.trajectory[0].l_cor <= 2 * kInitClamp);
    double moved = 0.0;
    for (std::size_t i = 0; i < theta0.size(); ++i) moved = std::max(moved, std::abs(state.logits[i] - theta0[i]));
    // a first AdamW step is bounded by the learning rate
    CHECK(moved <= s.optimizer.learning_rate * (1 + 1e-9));
}

TEST_CASE("pure correction descent suppresses the weaker blob") {
    const Volume p0 = two_blobs();
    RefineSettings s = small_settings();
    s.weights.alpha = 0.0;
    s.weights.beta = 0.0;
    s.optimizer.method = OptimizerMethod::plain_gradient;
    s.optimizer.learning_rate = 0.5;
    s.curriculum = {30, 90, 3};
    RefinementState state = init_state(p0);
    double prev = weak_blob_max(sigmoid(state.logits));
    const double start = prev;
    while (state.iteration < s.curriculum.T) {
        step(state, s);
        const double now = weak_blob_max(sigmoid(state.logits));
        CHECK(now <= prev);
        prev = now;
    }
    CHECK(prev < start - 0.1);
    CHECK(state.trajectory.front().beta0 == 2);
}

TEST_CASE("runs are reproducible bit for bit") {
    PhantomRng rng(9);
    const Volume p0 = testing_support::random_probability(rng, {7, 6, 5}, 9, 0.0);
    RefineSettings s = small_settings();
    s.curriculum = {5, 15, 3};
    s.optimizer.learning_rate = 0.2;
    const RefineResult a = run(p0, s);
    const RefineResult b = run(p0, s);
    CHECK(same_bits(a.refined.values(), b.refined.values()));
    REQUIRE(a.trajectory.size() == b.trajectory.size());
    for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
        CHECK(a.trajectory[i].beta0 == b.trajectory[i].beta0);
        CHECK(std::memcmp(&a.trajectory[i].l_total, &b.trajectory[i].l_total, sizeof(double)) == 0);
    }
}

TEST_CASE("revalue rereads cached voxels and drops collapsed pairs") {
    const Volume p({1, 1, 4}, {1, 1, 1}, Role::probability, std::vector<double>{0.9, 0.2, 0.8, 0.1});
    const Barcode cached = compute_ph0(p);
    const Volume q({1, 1, 4}, {1, 1, 1}, Role::probability, std::vector<double>{0.6, 0.3, 0.7, 0.1});
    const Barcode r = revalue(cached, q);
    REQUIRE(r.size() == 2);
    CHECK(r.pairs[0].birth == 0.6);
    CHECK(r.pairs[1].birth == 0.7);
    CHECK(r.pairs[1].death == 0.3);
    const Volume flat({1, 1, 4}, {1, 1, 1}, Role::probability, std::vector<double>{0.6, 0.5, 0.5, 0.1});
    CHECK(revalue(cached, flat).size() == 1);
}

TEST_CASE("divergence reports the iteration and keeps the partial trajectory") {
    PhantomRng rng(10);
    const Volume p0 = testing_support::distinct_probability(rng, {4, 4, 4});
    RefineSettings s = small_settings();
    s.optimizer.method = OptimizerMethod::plain_gradient;
    s.optimizer.learning_rate = 1e308;
    s.curriculum = {2, 6, 1};
    try {
        (void)run(p0, s);
        FAIL("expected divergence");
    } catch (const RefinementError& e) {
        CHECK(std::string(e.what()).find("iteration") != std::string::npos);
        CHECK_FALSE(e.partial_trajectory().empty());
    }
}

TEST_CASE("configuration validation") {
    RefineSettings s;
    s.curriculum = {40, 30, 3};
    CHECK_THROWS_AS(validate(s), UsageError);
    s = RefineSettings{};
    s.curriculum.k = 0;
    CHECK_THROWS_AS(validate(s), UsageError);
    s = RefineSettings{};
    s.weights.gamma = 1.5;
    CHECK_THROWS_AS(validate(s), UsageError);
    CHECK_THROWS_AS(optimizer_from_string("rmsprop"), UsageError);
    CHECK(optimizer_from_string(to_string(OptimizerMethod::plain_gradient)) == OptimizerMethod::plain_gradient);
}

}  // TEST_SUITE
