#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedsv/aggregation.hpp"
#include "fedsv/attacks.hpp"
#include "fedsv/data.hpp"
#include "fedsv/model.hpp"
#include "fedsv/selection.hpp"
#include "fedsv/shapley.hpp"

namespace fedsv {

enum class DatasetKind { Synthetic, Mnist };
enum class DefenseKind { FedSv, FedAvg, CoordMedian, TrimmedMean, MultiKrum };

const char* defense_name(DefenseKind kind);
const char* attack_name(AttackKind kind);

struct SyntheticSpec {
    int classes = 10;
    int per_class = 100;
    int test_per_class = 100;
    int input_dim = 20;
    double spread = 1.0;
};

struct DefenseSpec {
    DefenseKind kind = DefenseKind::FedSv;
    // trimmed_mean; -1 derives b = N/4
    int trim_count = -1;
    // multi_krum; -1 derives f from the knowledge setting (full: f = N_m,
    // partial: f = N/2) and selection_size = N - f
    int byzantine_count = -1;
    int selection_size = -1;
    Knowledge knowledge = Knowledge::Partial;
    // fedsv
    SvConfig sv;
    double lambda = 0.0;
    double alpha = 0.3;
    double beta = 0.7;
    double min_spread = 0.03;
    ThresholdForm threshold_form = ThresholdForm::SubtractLambda;
};

struct RunConfig {
    std::string run_id = "run";
    int num_clients = 20;
    int num_malicious = 0;
    int rounds = 40;
    TrainConfig train;
    Arch arch = Arch::Logistic;
    int hidden_dim = 16;
    DatasetKind dataset_kind = DatasetKind::Synthetic;
    SyntheticSpec synth;
    std::string mnist_dir;  // falls back to FEDSV_DATA_DIR
    int classes_per_client = 3;
    double validation_fraction = 0.1;
    AttackSpec attack;
    DefenseSpec defense;
    int sv_frequency = 1;
    uint64_t master_seed = 1;
    // Not part of the run semantics: reference accuracy for the success
    // flag (NaN disables it) and whether to record wall-clock time.
    double baseline_accuracy = std::nan("");
    bool record_wall_time = true;
};

struct RoundRecord {
    int round = 0;  // 1-based
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<int> selected;
    bool sv_round = false;          // SVs recomputed this round
    std::vector<double> sv;         // instantaneous, sv rounds only
    std::vector<double> sv_bar;     // smoothed ledger after the update
    double wall_time_s = 0.0;
};

struct RunSummary {
    std::string run_id;
    DefenseKind defense = DefenseKind::FedAvg;
    AttackKind attack = AttackKind::None;
    int num_clients = 0;
    int num_malicious = 0;
    uint64_t master_seed = 0;
    double final_loss = 0.0;
    double final_accuracy = 0.0;
    double baseline_accuracy = std::nan("");
    bool success = false;  // final_accuracy >= 0.8 * baseline_accuracy
    std::optional<int> rounds_to_full_exclusion;
    int false_exclusions = 0;  // honest-client exclusion events on SV rounds
    std::vector<int> malicious_ids;
    std::vector<RoundRecord> records;
    std::string error;  // non-empty when a sweep cell aborted
};

using RoundCallback = std::function<void(const RoundRecord&)>;

// Executes the round loop: broadcast, local training, attack transforms,
// then the configured defense. Deterministic per master_seed.
RunSummary run(const RunConfig& config, const RoundCallback& on_round = {});

// Grid over malicious fractions x repetitions with seeds master_seed + index.
// Per-cell errors are contained in the returned summaries. A clean FedAvg
// baseline (no attack, no malicious clients) is run once per distinct seed
// to fill in the success flags. sink_factory, when given, supplies a
// per-round callback for each cell (the CLI uses it to stream metrics).
using RoundSinkFactory = std::function<RoundCallback(const RunConfig&)>;
std::vector<RunSummary> run_sweep(const RunConfig& base,
                                  const std::vector<double>& malicious_fractions,
                                  int repetitions,
                                  const RoundSinkFactory& sink_factory = {});

struct DetectionRound {
    int round = 0;
    double precision = 0.0;  // 1.0 when nothing was excluded
    double recall = 0.0;
    bool all_malicious_excluded = false;
};

struct DetectionReport {
    std::vector<DetectionRound> per_round;        // every round, effective sets
    std::optional<int> rounds_to_full_exclusion;  // stable over later SV rounds
    double final_precision = 0.0;
    double final_recall = 0.0;
};

// Compares each round's exclusion set against the ground-truth malicious
// set. Only meaningful for fedsv runs; anything else throws.
DetectionReport detection_report(const RunSummary& summary,
                                 const std::vector<int>& true_malicious);

}  // namespace fedsv
