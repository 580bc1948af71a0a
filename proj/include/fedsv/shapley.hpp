#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "fedsv/data.hpp"
#include "fedsv/model.hpp"
#include "fedsv/rng.hpp"

namespace fedsv {

// A coalition is a bitmask over players 0..N-1.
using Coalition = uint64_t;

inline Coalition coalition_bit(int player) { return Coalition{1} << player; }

class CoalitionGame {
public:
    CoalitionGame(int player_count, std::function<double(Coalition)> value)
        : n_(player_count), value_(std::move(value)) {}

    int player_count() const { return n_; }
    double value(Coalition c) const { return value_(c); }
    Coalition grand() const { return (Coalition{1} << n_) - 1; }

private:
    int n_;
    std::function<double(Coalition)> value_;
};

struct Permutation {
    std::vector<int> order;  // bijection of [0, N)

    static Permutation identity(int n);
    static Permutation random(int n, Rng& rng);
    Permutation reversed() const;
};

enum class SvMethod { Exact, Mc, Antithetic, AntitheticTruncated, Stratified };

struct SvEstimate {
    std::vector<double> values;
    int64_t samples_used = 0;  // permutations consumed (0 for exact)
    SvMethod method = SvMethod::Exact;
};

struct ConfidenceSpec {
    double epsilon = 0.1;
    double delta = 0.05;
    // Var[f_i(pi)] bound for the plain MC bound, r_max for the stratified one.
    double variance_bound = 1.0;
    int strata = 0;  // d, stratified only
};

enum class SampleBound { Mc, Stratified };

// Chebyshev sample-size bounds: m >= Var/(delta eps^2) for plain MC and
// m >= d r_max^2 / (4 delta eps^2) for stratified sampling.
int64_t required_samples(const ConfidenceSpec& spec, SampleBound method);

// Exact Shapley value by subset enumeration; refuses N > 20.
SvEstimate exact_shapley(const CoalitionGame& game);

// Classical Monte Carlo over m uniform permutations.
SvEstimate mc_shapley(const CoalitionGame& game, int64_t m, uint64_t seed);

// Full-enumeration mode: averages the marginal walk over all N!
// permutations, which is the permutation-form definition verbatim.
SvEstimate mc_shapley_enumerate_all(const CoalitionGame& game);

// m/2 uniform permutations, each paired with its exact reversal.
SvEstimate antithetic_shapley(const CoalitionGame& game, int64_t m, uint64_t seed);

// One truncated permutation walk: once the prefix value is within
// tol_trunc of the grand-coalition value, the remaining players get
// marginal 0 and their value calls are skipped. tol_trunc = 0 disables
// truncation (strict inequality).
std::vector<double> truncated_scan(const CoalitionGame& game, const Permutation& pi,
                                   double tol_trunc);

// Antithetic pairs with truncated walks (TAMC).
SvEstimate tamc_shapley(const CoalitionGame& game, int64_t m, double tol_trunc,
                        uint64_t seed);

enum class StratifiedAllocation { Uniform, ProportionalToRange };

// Per-position strata: for player i and position l, samples permutations
// with i fixed at position l (uniform random prefix from the others);
// per-stratum means are combined with equal weights 1/N.
SvEstimate stratified_shapley(const CoalitionGame& game, int64_t m,
                              StratifiedAllocation allocation, uint64_t seed);

// Round value function for FedSV: v(S) is the validation accuracy of the
// n_k-weighted average of the members' updates, v(empty) the accuracy of
// the previous global model. Subset values are memoized per round.
class FlValueFunction {
public:
    FlValueFunction(std::vector<ParamVector> updates, std::vector<int64_t> weights,
                    ParamVector previous_global, ModelSpec spec,
                    const LabeledDataset* validation, bool memoize = true);

    int player_count() const { return static_cast<int>(updates_.size()); }
    double value(Coalition coalition) const;
    CoalitionGame game() const;

    // Cache misses, i.e. actual validation passes.
    int64_t evaluations() const { return evals_.load(); }

private:
    double compute(Coalition coalition) const;

    std::vector<ParamVector> updates_;
    std::vector<int64_t> weights_;
    ParamVector previous_global_;
    ModelSpec spec_;
    const LabeledDataset* validation_;
    bool memoize_;
    mutable std::unordered_map<Coalition, double> cache_;
    mutable std::mutex mutex_;
    mutable std::atomic<int64_t> evals_{0};
};

struct SvConfig {
    SvMethod method = SvMethod::AntitheticTruncated;
    int64_t samples = 40;  // ignored when confidence is set
    std::optional<ConfidenceSpec> confidence;
    double tol_trunc = 0.01;
    StratifiedAllocation allocation = StratifiedAllocation::Uniform;
    // Walk only the first d placements of each sampled permutation; 0 means
    // full permutations. A biased cost saver, off by default.
    int permutation_length = 0;
    uint64_t seed = 0;
};

SvEstimate estimate_sv(const FlValueFunction& value_fn, const SvConfig& cfg);

}  // namespace fedsv
