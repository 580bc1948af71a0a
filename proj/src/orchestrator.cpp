#include "fedsv/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <map>
#include <numeric>
#include <set>

#include "fedsv/errors.hpp"
#include "fedsv/rng.hpp"

namespace fedsv {

const char* defense_name(DefenseKind kind) {
    switch (kind) {
        case DefenseKind::FedSv: return "fedsv";
        case DefenseKind::FedAvg: return "fedavg";
        case DefenseKind::CoordMedian: return "coord_median";
        case DefenseKind::TrimmedMean: return "trimmed_mean";
        case DefenseKind::MultiKrum: return "multi_krum";
    }
    return "?";
}

const char* attack_name(AttackKind kind) {
    switch (kind) {
        case AttackKind::None: return "none";
        case AttackKind::SignFlip: return "sign_flip";
        case AttackKind::GaussianNoise: return "gaussian_noise";
        case AttackKind::BackdoorLabelFlip: return "backdoor_label_flip";
    }
    return "?";
}

namespace {

void validate(const RunConfig& c) {
    if (c.num_clients < 1) throw ConfigError("run: num_clients must be >= 1");
    if (c.num_malicious < 0 || c.num_malicious > c.num_clients)
        throw ConfigError("run: num_malicious must be in [0, num_clients]");
    if (c.rounds < 1) throw ConfigError("run: rounds must be >= 1");
    if (c.sv_frequency < 1) throw ConfigError("run: sv_frequency must be >= 1");
    if (c.train.learning_rate <= 0.0) throw ConfigError("train: learning_rate must be > 0");
    if (c.train.epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (c.train.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (c.validation_fraction <= 0.0 || c.validation_fraction >= 1.0)
        throw ConfigError("data: validation_fraction must be in (0,1)");
    if (c.defense.lambda < -1.0 || c.defense.lambda > 1.0)
        throw ConfigError("defense: lambda must be in [-1,1]");
}

struct RunData {
    std::vector<ClientShard> shards;
    LabeledDataset validation;
    LabeledDataset reporting;
    ModelSpec model_spec;
};

RunData prepare_data(const RunConfig& c) {
    LabeledDataset train_full, test_full;
    if (c.dataset_kind == DatasetKind::Synthetic) {
        const SyntheticSpec& s = c.synth;
        train_full = synth_blobs(s.classes, s.per_class, s.input_dim, s.spread,
                                 derive_seed(c.master_seed, "data", 0));
        test_full = synth_blobs(s.classes, s.test_per_class, s.input_dim, s.spread,
                                derive_seed(c.master_seed, "data", 1));
    } else {
        std::string dir = c.mnist_dir;
        if (dir.empty()) {
            const char* env = std::getenv("FEDSV_DATA_DIR");
            if (env) dir = env;
        }
        if (dir.empty()) throw ConfigError("data: mnist_dir not set and FEDSV_DATA_DIR unset");
        train_full = load_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
        test_full = load_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
    }

    RunData d;
    auto split = split_fraction(test_full, c.validation_fraction,
                                derive_seed(c.master_seed, "valsplit"));
    d.validation = std::move(split.first);
    d.reporting = std::move(split.second);

    PartitionSpec pspec;
    pspec.num_clients = c.num_clients;
    pspec.num_classes = train_full.num_classes;
    pspec.classes_per_client = c.classes_per_client;
    pspec.seed = derive_seed(c.master_seed, "partition");
    d.shards = partition_noniid(train_full, pspec, c.num_malicious);

    d.model_spec.arch = c.arch;
    d.model_spec.input_dim = train_full.input_dim;
    d.model_spec.num_classes = train_full.num_classes;
    d.model_spec.hidden_dim = c.hidden_dim;
    return d;
}

void fill_detection_stats(RunSummary& s) {
    const std::set<int> malicious(s.malicious_ids.begin(), s.malicious_ids.end());
    int last_incomplete_sv_round = 0;  // last SV round with a malicious client selected
    bool any_sv_round = false;
    int first_sv_round = 0;
    for (const RoundRecord& rec : s.records) {
        if (!rec.sv_round) continue;
        if (!any_sv_round) first_sv_round = rec.round;
        any_sv_round = true;
        bool all_excluded = true;
        for (int id : rec.selected) {
            if (malicious.count(id)) all_excluded = false;
        }
        if (!all_excluded) last_incomplete_sv_round = rec.round;
        const size_t honest_selected = rec.selected.size() -
            std::count_if(rec.selected.begin(), rec.selected.end(),
                          [&](int id) { return malicious.count(id) > 0; });
        s.false_exclusions += static_cast<int>(
            (static_cast<size_t>(s.num_clients) - malicious.size()) - honest_selected);
    }
    if (!any_sv_round) return;
    if (last_incomplete_sv_round == 0) {
        s.rounds_to_full_exclusion = first_sv_round;
    } else {
        // First SV round after the last failure, if any SV round follows it.
        for (const RoundRecord& rec : s.records) {
            if (rec.sv_round && rec.round > last_incomplete_sv_round) {
                s.rounds_to_full_exclusion = rec.round;
                break;
            }
        }
    }
}

}  // namespace

RunSummary run(const RunConfig& config, const RoundCallback& on_round) {
    validate(config);
    RunData data = prepare_data(config);
    const int n = config.num_clients;

    Model global = make_model(data.model_spec, derive_seed(config.master_seed, "init"));

    std::vector<int64_t> weights(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) weights[static_cast<size_t>(k)] = data.shards[static_cast<size_t>(k)].n_k;

    const DefenseSpec& def = config.defense;
    const int krum_f = def.byzantine_count >= 0
                           ? def.byzantine_count
                           : (def.knowledge == Knowledge::Full ? config.num_malicious : n / 2);
    const int krum_sel = def.selection_size >= 0 ? def.selection_size : n - krum_f;
    const int trim_b = def.trim_count >= 0 ? def.trim_count : n / 4;
    const ClusFedSpec clus{def.lambda, def.min_spread, def.threshold_form};

    SvLedger ledger = make_ledger(n, def.alpha, def.beta, 0.0);
    std::vector<int> selected = iota_ids(n);

    RunSummary summary;
    summary.run_id = config.run_id;
    summary.defense = def.kind;
    summary.attack = config.attack.kind;
    summary.num_clients = n;
    summary.num_malicious = config.num_malicious;
    summary.master_seed = config.master_seed;
    for (int k = 0; k < config.num_malicious; ++k) summary.malicious_ids.push_back(k);

    std::vector<ParamVector> updates(static_cast<size_t>(n));
    for (int t = 1; t <= config.rounds; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            for (int k = 0; k < n; ++k) {
                TrainConfig tc = config.train;
                tc.seed = derive_seed(config.master_seed, "client",
                                      static_cast<uint64_t>(k), static_cast<uint64_t>(t));
                const ClientShard& shard = data.shards[static_cast<size_t>(k)];
                ParamVector honest = local_train(global, shard, tc);
                AttackContext ctx{&global, tc};
                updates[static_cast<size_t>(k)] =
                    apply_attack(shard, honest, config.attack, ctx, t,
                                 derive_seed(config.master_seed, "attack",
                                             static_cast<uint64_t>(k), static_cast<uint64_t>(t)));
            }

            RoundRecord rec;
            rec.round = t;
            switch (def.kind) {
                case DefenseKind::FedSv: {
                    if ((t - 1) % config.sv_frequency == 0) {
                        FlValueFunction vf(updates, weights, global.params, data.model_spec,
                                           &data.validation);
                        SvConfig svc = def.sv;
                        svc.seed = derive_seed(config.master_seed, "sv", static_cast<uint64_t>(t));
                        SvEstimate est = estimate_sv(vf, svc);
                        ledger = update_ledger(ledger, est.values);
                        selected = clusfed(ledger.smoothed, clus);
                        rec.sv_round = true;
                        rec.sv = est.values;
                    }
                    rec.sv_bar = ledger.smoothed;
                    global.params = selected_global_model(updates, weights, selected);
                    break;
                }
                case DefenseKind::FedAvg:
                    selected = iota_ids(n);
                    global.params = fedavg(updates, weights);
                    break;
                case DefenseKind::CoordMedian:
                    selected = iota_ids(n);
                    global.params = coord_median(updates);
                    break;
                case DefenseKind::TrimmedMean:
                    selected = iota_ids(n);
                    global.params = trimmed_mean(updates, trim_b);
                    break;
                case DefenseKind::MultiKrum: {
                    MultiKrumResult r = multi_krum(updates, krum_f, krum_sel);
                    selected = r.selected;
                    global.params = std::move(r.aggregate);
                    break;
                }
            }
            rec.selected = selected;

            const EvalResult ev = evaluate(global.params, data.model_spec, data.reporting);
            rec.loss = ev.loss;
            rec.accuracy = ev.accuracy;
            if (config.record_wall_time) {
                rec.wall_time_s = std::chrono::duration<double>(
                                      std::chrono::steady_clock::now() - t0).count();
            }
            summary.records.push_back(rec);
            if (on_round) on_round(summary.records.back());
        } catch (const DivergenceError& e) {
            throw RunAbortError(t, e.what());
        }
    }

    summary.final_loss = summary.records.back().loss;
    summary.final_accuracy = summary.records.back().accuracy;
    summary.baseline_accuracy = config.baseline_accuracy;
    if (!std::isnan(config.baseline_accuracy))
        summary.success = summary.final_accuracy >= 0.8 * config.baseline_accuracy;
    if (def.kind == DefenseKind::FedSv) fill_detection_stats(summary);
    return summary;
}

std::vector<RunSummary> run_sweep(const RunConfig& base,
                                  const std::vector<double>& malicious_fractions,
                                  int repetitions, const RoundSinkFactory& sink_factory) {
    if (repetitions < 1) throw std::invalid_argument("run_sweep: repetitions must be >= 1");
    std::map<uint64_t, double> baseline_by_seed;
    auto baseline_for = [&](uint64_t seed) {
        auto it = baseline_by_seed.find(seed);
        if (it != baseline_by_seed.end()) return it->second;
        RunConfig clean = base;
        clean.master_seed = seed;
        clean.num_malicious = 0;
        clean.attack.kind = AttackKind::None;
        clean.defense = DefenseSpec{};
        clean.defense.kind = DefenseKind::FedAvg;
        clean.run_id = base.run_id + "-baseline-s" + std::to_string(seed);
        clean.baseline_accuracy = std::nan("");
        const double acc = run(clean).final_accuracy;
        baseline_by_seed.emplace(seed, acc);
        return acc;
    };

    std::vector<RunSummary> out;
    int index = 0;
    for (size_t fi = 0; fi < malicious_fractions.size(); ++fi) {
        const double frac = malicious_fractions[fi];
        for (int rep = 0; rep < repetitions; ++rep, ++index) {
            RunConfig cell = base;
            cell.master_seed = base.master_seed + static_cast<uint64_t>(index);
            cell.num_malicious =
                static_cast<int>(std::llround(frac * static_cast<double>(base.num_clients)));
            cell.run_id = base.run_id + "-" + defense_name(base.defense.kind) + "-f" +
                          std::to_string(frac).substr(0, 4) + "-r" + std::to_string(rep);
            RunSummary s;
            try {
                cell.baseline_accuracy = baseline_for(cell.master_seed);
                s = run(cell, sink_factory ? sink_factory(cell) : RoundCallback{});
            } catch (const std::exception& e) {
                s.run_id = cell.run_id;
                s.defense = cell.defense.kind;
                s.attack = cell.attack.kind;
                s.num_clients = cell.num_clients;
                s.num_malicious = cell.num_malicious;
                s.master_seed = cell.master_seed;
                s.error = e.what();
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

DetectionReport detection_report(const RunSummary& summary,
                                 const std::vector<int>& true_malicious) {
    if (summary.defense != DefenseKind::FedSv)
        throw NotApplicableError("detection_report: only applicable to fedsv runs");
    const std::set<int> malicious(true_malicious.begin(), true_malicious.end());
    DetectionReport rep;
    int last_incomplete_sv_round = 0;
    bool any_sv = false;
    int first_sv_round = 0;
    for (const RoundRecord& rec : summary.records) {
        const std::set<int> sel(rec.selected.begin(), rec.selected.end());
        std::vector<int> excluded;
        for (int id = 0; id < summary.num_clients; ++id)
            if (!sel.count(id)) excluded.push_back(id);
        int tp = 0;
        for (int id : excluded)
            if (malicious.count(id)) ++tp;
        DetectionRound dr;
        dr.round = rec.round;
        dr.precision = excluded.empty() ? 1.0
                                        : static_cast<double>(tp) /
                                              static_cast<double>(excluded.size());
        dr.recall = malicious.empty() ? 1.0
                                      : static_cast<double>(tp) /
                                            static_cast<double>(malicious.size());
        dr.all_malicious_excluded = (tp == static_cast<int>(malicious.size()));
        rep.per_round.push_back(dr);
        if (rec.sv_round) {
            if (!any_sv) first_sv_round = rec.round;
            any_sv = true;
            if (!dr.all_malicious_excluded) last_incomplete_sv_round = rec.round;
        }
    }
    if (!rep.per_round.empty()) {
        rep.final_precision = rep.per_round.back().precision;
        rep.final_recall = rep.per_round.back().recall;
    }
    if (any_sv) {
        if (last_incomplete_sv_round == 0) {
            rep.rounds_to_full_exclusion = first_sv_round;
        } else {
            for (const RoundRecord& rec : summary.records) {
                if (rec.sv_round && rec.round > last_incomplete_sv_round) {
                    rep.rounds_to_full_exclusion = rec.round;
                    break;
                }
            }
        }
    }
    return rep;
}

}  // namespace fedsv
