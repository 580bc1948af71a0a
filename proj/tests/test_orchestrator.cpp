#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "fedsv/errors.hpp"
#include "fedsv/orchestrator.hpp"

using namespace fedsv;

namespace {

// Small-but-real configuration so round-loop tests stay fast.
RunConfig toy_config() {
    RunConfig c;
    c.num_clients = 6;
    c.num_malicious = 0;
    c.rounds = 4;
    c.synth.classes = 5;
    c.synth.per_class = 30;
    c.synth.test_per_class = 30;
    c.synth.input_dim = 10;
    c.train.epochs = 2;
    c.train.batch_size = 10;
    c.defense.sv.samples = 8;
    c.master_seed = 7;
    c.record_wall_time = false;
    return c;
}

bool records_equal(const RunSummary& a, const RunSummary& b) {
    if (a.records.size() != b.records.size()) return false;
    for (size_t i = 0; i < a.records.size(); ++i) {
        const RoundRecord& x = a.records[i];
        const RoundRecord& y = b.records[i];
        if (x.round != y.round || x.loss != y.loss || x.accuracy != y.accuracy ||
            x.selected != y.selected || x.sv != y.sv || x.sv_bar != y.sv_bar)
            return false;
    }
    return true;
}

}  // namespace

TEST_CASE("run: one round produces exactly one record") {
    RunConfig c = toy_config();
    c.rounds = 1;
    const RunSummary s = run(c);
    CHECK(s.records.size() == 1);
    CHECK(s.records[0].round == 1);
    CHECK(s.final_accuracy == s.records[0].accuracy);
}

TEST_CASE("run: records are ordered with accuracies in [0,1]") {
    RunConfig c = toy_config();
    c.defense.kind = DefenseKind::FedAvg;
    const RunSummary s = run(c);
    int expect = 1;
    for (const RoundRecord& r : s.records) {
        CHECK(r.round == expect++);
        CHECK(r.accuracy >= 0.0);
        CHECK(r.accuracy <= 1.0);
        CHECK(std::isfinite(r.loss));
    }
}

TEST_CASE("run: bit-reproducible for a fixed master seed") {
    for (DefenseKind d : {DefenseKind::FedAvg, DefenseKind::FedSv, DefenseKind::MultiKrum}) {
        RunConfig c = toy_config();
        c.defense.kind = d;
        c.num_malicious = 2;
        c.attack.kind = AttackKind::SignFlip;
        const RunSummary a = run(c);
        const RunSummary b = run(c);
        CHECK(records_equal(a, b));
        CHECK(a.final_accuracy == b.final_accuracy);
    }
}

TEST_CASE("run: with no attack, malicious flags change nothing") {
    RunConfig honest = toy_config();
    honest.defense.kind = DefenseKind::FedSv;
    RunConfig flagged = honest;
    flagged.num_malicious = 3;
    flagged.attack.kind = AttackKind::None;
    const RunSummary a = run(honest);
    const RunSummary b = run(flagged);
    CHECK(records_equal(a, b));
}

TEST_CASE("run: a huge degeneracy guard reduces FedSV to FedAvg") {
    RunConfig fedavg_cfg = toy_config();
    fedavg_cfg.defense.kind = DefenseKind::FedAvg;
    RunConfig fedsv_cfg = toy_config();
    fedsv_cfg.defense.kind = DefenseKind::FedSv;
    fedsv_cfg.defense.lambda = -1.0;
    fedsv_cfg.defense.min_spread = 1e9;  // spread is always below it
    const RunSummary a = run(fedavg_cfg);
    const RunSummary b = run(fedsv_cfg);
    REQUIRE(a.records.size() == b.records.size());
    for (size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].loss == b.records[i].loss);
        CHECK(a.records[i].accuracy == b.records[i].accuracy);
        CHECK(b.records[i].selected.size() == 6);
    }
}

TEST_CASE("run: sv_frequency reuses the last selection between SV rounds") {
    RunConfig c = toy_config();
    c.defense.kind = DefenseKind::FedSv;
    c.rounds = 7;
    c.sv_frequency = 3;
    c.num_malicious = 2;
    c.attack.kind = AttackKind::SignFlip;
    const RunSummary s = run(c);
    for (const RoundRecord& r : s.records) {
        const bool expect_sv = (r.round - 1) % 3 == 0;
        CHECK(r.sv_round == expect_sv);
        CHECK(r.sv.empty() == !expect_sv);
    }
    CHECK(s.records[1].selected == s.records[0].selected);
    CHECK(s.records[2].selected == s.records[0].selected);
}

TEST_CASE("run: non-positive learning rate is a config error") {
    RunConfig c = toy_config();
    c.train.learning_rate = 0.0;
    CHECK_THROWS_AS((void)run(c), ConfigError);
}

TEST_CASE("run: divergence aborts with the offending round") {
    RunConfig c = toy_config();
    c.defense.kind = DefenseKind::FedAvg;
    c.train.learning_rate = 1e12;
    c.train.epochs = 4;
    try {
        (void)run(c);
        FAIL("expected RunAbortError");
    } catch (const RunAbortError& e) {
        CHECK(e.round == 1);
    }
}

TEST_CASE("run: fedsv excludes sign-flippers in a short attacked run") {
    RunConfig c = toy_config();
    c.defense.kind = DefenseKind::FedSv;
    c.rounds = 6;
    c.num_malicious = 2;
    c.attack.kind = AttackKind::SignFlip;
    const RunSummary s = run(c);
    CHECK(s.malicious_ids == std::vector<int>{0, 1});
    const auto& last = s.records.back().selected;
    const std::set<int> sel(last.begin(), last.end());
    CHECK(!sel.count(0));
    CHECK(!sel.count(1));
    CHECK(s.rounds_to_full_exclusion.has_value());
}

TEST_CASE("detection_report: synthetic fixtures") {
    RunSummary s;
    s.defense = DefenseKind::FedSv;
    s.num_clients = 4;
    auto rec = [&](int round, std::vector<int> selected, bool sv_round) {
        RoundRecord r;
        r.round = round;
        r.selected = std::move(selected);
        r.sv_round = sv_round;
        s.records.push_back(r);
    };

    SUBCASE("all malicious excluded from round 3 on") {
        rec(1, {0, 1, 2, 3}, true);
        rec(2, {0, 1, 2, 3}, true);
        rec(3, {2, 3}, true);
        rec(4, {2, 3}, true);
        const auto rep = detection_report(s, {0, 1});
        REQUIRE(rep.rounds_to_full_exclusion.has_value());
        CHECK(*rep.rounds_to_full_exclusion == 3);
        CHECK(rep.final_precision == 1.0);
        CHECK(rep.final_recall == 1.0);
        CHECK(rep.per_round[0].recall == 0.0);
        CHECK(rep.per_round[0].precision == 1.0);  // nothing excluded
    }
    SUBCASE("no exclusion ever") {
        rec(1, {0, 1, 2, 3}, true);
        rec(2, {0, 1, 2, 3}, true);
        const auto rep = detection_report(s, {0, 1});
        CHECK(!rep.rounds_to_full_exclusion.has_value());
        CHECK(rep.final_recall == 0.0);
    }
    SUBCASE("mixed case matches hand bookkeeping") {
        rec(1, {1, 2, 3}, true);   // excluded {0}: tp=1 fp=0
        rec(2, {2, 3}, true);      // excluded {0,1}: one honest casualty
        const auto rep = detection_report(s, {0});
        CHECK(rep.per_round[0].precision == 1.0);
        CHECK(rep.per_round[0].recall == 1.0);
        CHECK(rep.per_round[1].precision == doctest::Approx(0.5));
        CHECK(rep.per_round[1].recall == 1.0);
        REQUIRE(rep.rounds_to_full_exclusion.has_value());
        CHECK(*rep.rounds_to_full_exclusion == 1);
    }
    SUBCASE("not applicable to other defenses") {
        s.defense = DefenseKind::FedAvg;
        CHECK_THROWS_AS((void)detection_report(s, {0}), NotApplicableError);
    }
}

TEST_CASE("run_sweep: grid shape, derived seeds, success flags") {
    RunConfig base = toy_config();
    base.defense.kind = DefenseKind::FedAvg;
    base.attack.kind = AttackKind::SignFlip;
    base.master_seed = 50;
    const auto out = run_sweep(base, {0.0, 0.5}, 2);
    REQUIRE(out.size() == 4);
    CHECK(out[0].master_seed == 50);
    CHECK(out[1].master_seed == 51);
    CHECK(out[2].master_seed == 52);
    CHECK(out[3].master_seed == 53);
    CHECK(out[0].num_malicious == 0);
    CHECK(out[2].num_malicious == 3);
    for (const auto& s : out) {
        CHECK(s.error.empty());
        CHECK(!std::isnan(s.baseline_accuracy));
    }
    // The clean cells compare a run against its own baseline settings.
    CHECK(out[0].success);
    CHECK(out[1].success);

    CHECK(run_sweep(base, {}, 2).empty());
    CHECK_THROWS_AS((void)run_sweep(base, {0.5}, 0), std::invalid_argument);
}

TEST_CASE("run_sweep: per-cell failures are contained") {
    RunConfig base = toy_config();
    base.defense.kind = DefenseKind::MultiKrum;
    base.defense.byzantine_count = 5;  // N - f - 2 < 1 for N = 6
    const auto out = run_sweep(base, {0.5}, 2);
    REQUIRE(out.size() == 2);
    for (const auto& s : out) {
        CHECK(!s.error.empty());
        CHECK(s.records.empty());
    }
}

TEST_CASE("run: multi_krum defaults derive from the knowledge setting") {
    RunConfig c = toy_config();
    c.defense.kind = DefenseKind::MultiKrum;
    c.num_malicious = 2;
    c.attack.kind = AttackKind::SignFlip;

    // Partial knowledge: f = N/2 = 3, keep N - f = 3 clients.
    const RunSummary partial = run(c);
    CHECK(partial.records.back().selected.size() == 3);

    // Full knowledge: f = N_m = 2, keep 4.
    c.defense.knowledge = Knowledge::Full;
    const RunSummary full = run(c);
    CHECK(full.records.back().selected.size() == 4);
}

TEST_CASE("run: honest-only fedsv settles on selecting everyone (10 seeds)") {
    // Early rounds may split on real training signal; once the SVs level
    // out the degeneracy guard keeps the full set every round.
    for (uint64_t s = 1000; s < 1010; ++s) {
        RunConfig c;  // desk-scale defaults
        c.defense.kind = DefenseKind::FedSv;
        c.master_seed = s;
        c.record_wall_time = false;
        const RunSummary r = run(c);
        for (const RoundRecord& rec : r.records) {
            if (rec.round <= 10) continue;
            CHECK(rec.selected.size() == static_cast<size_t>(c.num_clients));
        }
    }
}

TEST_CASE("run: round callback streams every record") {
    RunConfig c = toy_config();
    int seen = 0;
    const RunSummary s = run(c, [&](const RoundRecord& r) {
        ++seen;
        CHECK(r.round == seen);
    });
    CHECK(seen == c.rounds);
    CHECK(s.records.size() == static_cast<size_t>(c.rounds));
}
