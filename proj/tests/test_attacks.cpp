#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "fedsv/attacks.hpp"
#include "fedsv/data.hpp"
#include "fedsv/errors.hpp"
#include "fedsv/model.hpp"

using namespace fedsv;

namespace {

ClientShard make_shard(int id, Role role, uint64_t seed) {
    ClientShard sh;
    sh.client_id = id;
    sh.role = role;
    sh.data = synth_blobs(3, 10, 5, 1.0, seed);
    sh.n_k = static_cast<int64_t>(sh.data.size());
    return sh;
}

}  // namespace

TEST_CASE("sign_flip negates and preserves the norm exactly") {
    CHECK(sign_flip({1, -2, 3}) == ParamVector{-1, 2, -3});
    const ParamVector w = {0.1, -7.3, 2.2, 0.0, -0.5};
    CHECK(sign_flip(sign_flip(w)) == w);
    CHECK(l2_norm(sign_flip(w)) == l2_norm(w));
}

TEST_CASE("gaussian_noise: vanishing sigma, determinism, sample statistics") {
    Rng rng(5);
    ParamVector w(64);
    for (double& v : w) v = rng.uniform(-1.0, 1.0);

    const auto tiny = gaussian_noise(w, 1e-12, 3);
    for (size_t i = 0; i < w.size(); ++i) CHECK(std::abs(tiny[i] - w[i]) < 1e-9);

    CHECK(gaussian_noise(w, 0.5, 11) == gaussian_noise(w, 0.5, 11));
    CHECK(gaussian_noise(w, 0.5, 11) != gaussian_noise(w, 0.5, 12));
    CHECK_THROWS_AS((void)gaussian_noise(w, 0.0, 1), std::invalid_argument);

    // Empirical per-coordinate stddev over 10^4 draws within 5% of sigma.
    ParamVector big(10000, 0.0);
    const auto noisy = gaussian_noise(big, 0.5, 77);
    double mean = 0.0;
    for (double v : noisy) mean += v;
    mean /= static_cast<double>(noisy.size());
    double var = 0.0;
    for (double v : noisy) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(noisy.size() - 1));
    CHECK(sd == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("backdoor_label_flip moves exactly the source histogram mass") {
    ClientShard sh = make_shard(0, Role::Malicious, 9);
    std::map<int, int> before;
    for (int y : sh.data.labels) ++before[y];

    const ClientShard flipped = backdoor_label_flip(sh, 1, 2);
    std::map<int, int> after;
    for (int y : flipped.data.labels) ++after[y];
    CHECK(after[1] == 0);
    CHECK(after[2] == before[2] + before[1]);
    CHECK(after[0] == before[0]);
    CHECK(flipped.data.features == sh.data.features);
    CHECK(flipped.n_k == sh.n_k);

    // No source samples: unchanged (class 1 already emptied above).
    const ClientShard again = backdoor_label_flip(flipped, 1, 0);
    CHECK(again.data.labels == flipped.data.labels);

    // Entirely source: all move to target.
    ClientShard mono = sh;
    for (int& y : mono.data.labels) y = 1;
    const ClientShard moved = backdoor_label_flip(mono, 1, 2);
    for (int y : moved.data.labels) CHECK(y == 2);

    CHECK_THROWS_AS((void)backdoor_label_flip(sh, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)backdoor_label_flip(sh, 1, 9), std::invalid_argument);
}

TEST_CASE("apply_attack: gates and transformations") {
    ClientShard mal = make_shard(0, Role::Malicious, 13);
    ClientShard hon = make_shard(1, Role::Honest, 13);
    Model global = make_model({Arch::Logistic, 5, 3, 0}, 17);
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 10;
    tc.seed = 21;
    AttackContext ctx{&global, tc};
    const ParamVector honest_update = local_train(global, mal, tc);

    AttackSpec spec;
    SUBCASE("kind none passes through") {
        spec.kind = AttackKind::None;
        CHECK(apply_attack(mal, honest_update, spec, ctx, 5, 1) == honest_update);
    }
    SUBCASE("before start_round nothing happens") {
        spec.kind = AttackKind::SignFlip;
        spec.start_round = 10;
        CHECK(apply_attack(mal, honest_update, spec, ctx, 9, 1) == honest_update);
        CHECK(apply_attack(mal, honest_update, spec, ctx, 10, 1) == negate(honest_update));
    }
    SUBCASE("sign flip from round zero negates every round") {
        spec.kind = AttackKind::SignFlip;
        for (int t : {0, 1, 7})
            CHECK(apply_attack(mal, honest_update, spec, ctx, t, 1) == negate(honest_update));
    }
    SUBCASE("honest clients are never transformed") {
        spec.kind = AttackKind::SignFlip;
        CHECK(apply_attack(hon, honest_update, spec, ctx, 3, 1) == honest_update);
        spec.kind = AttackKind::GaussianNoise;
        CHECK(apply_attack(hon, honest_update, spec, ctx, 3, 1) == honest_update);
    }
    SUBCASE("gaussian noise uses the given seed") {
        spec.kind = AttackKind::GaussianNoise;
        spec.noise_sigma = 0.25;
        const auto a = apply_attack(mal, honest_update, spec, ctx, 2, 555);
        CHECK(a == gaussian_noise(honest_update, 0.25, 555));
        CHECK(a.size() == honest_update.size());
    }
    SUBCASE("backdoor retrains on the flipped shard") {
        spec.kind = AttackKind::BackdoorLabelFlip;
        spec.source_class = 0;
        spec.target_class = 1;
        const auto got = apply_attack(mal, honest_update, spec, ctx, 2, 1);
        const auto want = local_train(global, backdoor_label_flip(mal, 0, 1), tc);
        CHECK(got == want);
        CHECK(got.size() == honest_update.size());
    }
}
