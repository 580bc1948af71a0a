#include "fedsv/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "fedsv/aggregation.hpp"
#include "fedsv/errors.hpp"

namespace fedsv {

Permutation Permutation::identity(int n) {
    Permutation p;
    p.order = iota_ids(n);
    return p;
}

Permutation Permutation::random(int n, Rng& rng) {
    Permutation p = identity(n);
    rng.shuffle(p.order);
    return p;
}

Permutation Permutation::reversed() const {
    Permutation p;
    p.order.assign(order.rbegin(), order.rend());
    return p;
}

int64_t required_samples(const ConfidenceSpec& spec, SampleBound method) {
    if (spec.epsilon <= 0.0) throw std::invalid_argument("required_samples: epsilon must be > 0");
    if (spec.delta <= 0.0 || spec.delta >= 1.0)
        throw std::invalid_argument("required_samples: delta must be in (0,1)");
    if (spec.variance_bound <= 0.0)
        throw std::invalid_argument("required_samples: variance bound must be > 0");
    double bound;
    if (method == SampleBound::Mc) {
        bound = spec.variance_bound / (spec.delta * spec.epsilon * spec.epsilon);
    } else {
        if (spec.strata < 1) throw std::invalid_argument("required_samples: strata must be >= 1");
        bound = static_cast<double>(spec.strata) * spec.variance_bound * spec.variance_bound /
                (4.0 * spec.delta * spec.epsilon * spec.epsilon);
    }
    // Snap to the nearest integer when the bound is one up to fp noise.
    const double nearest = std::nearbyint(bound);
    if (std::abs(bound - nearest) < 1e-9 * std::max(1.0, std::abs(bound)))
        return static_cast<int64_t>(nearest);
    return static_cast<int64_t>(std::ceil(bound));
}

SvEstimate exact_shapley(const CoalitionGame& game) {
    const int n = game.player_count();
    if (n < 1) throw std::invalid_argument("exact_shapley: need at least one player");
    if (n > 20) throw CapacityError("exact_shapley: N > 20 would enumerate 2^N subsets");

    const size_t count = size_t{1} << n;
    std::vector<double> table(count);
    for (Coalition c = 0; c < count; ++c) table[c] = game.value(c);

    // w(s) = s!(N-s-1)!/N!, built by recurrence so factorials never overflow.
    std::vector<double> w(static_cast<size_t>(n));
    w[0] = 1.0 / static_cast<double>(n);
    for (int s = 1; s < n; ++s)
        w[static_cast<size_t>(s)] = w[static_cast<size_t>(s - 1)] *
                                    static_cast<double>(s) / static_cast<double>(n - s);

    SvEstimate est;
    est.method = SvMethod::Exact;
    est.samples_used = 0;
    est.values.assign(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        const Coalition bit = coalition_bit(i);
        double sv = 0.0;
        for (Coalition c = 0; c < count; ++c) {
            if (c & bit) continue;
            const int s = std::popcount(c);
            sv += w[static_cast<size_t>(s)] * (table[c | bit] - table[c]);
        }
        est.values[static_cast<size_t>(i)] = sv;
    }
    return est;
}

namespace {

// Untruncated marginal walk; v_empty is the cached v(empty set).
void scan_permutation(const CoalitionGame& game, const std::vector<int>& order,
                      double v_empty, std::vector<double>& marginals) {
    Coalition mask = 0;
    double prev = v_empty;
    for (int p : order) {
        mask |= coalition_bit(p);
        const double cur = game.value(mask);
        marginals[static_cast<size_t>(p)] = cur - prev;
        prev = cur;
    }
}

// Truncated walk; marginals past the truncation point stay 0. The check
// starts once the prefix is non-empty, so the first player always receives
// its real marginal.
void scan_permutation_truncated(const CoalitionGame& game, const std::vector<int>& order,
                                double v_empty, double v_grand, double tol_trunc,
                                std::vector<double>& marginals) {
    std::fill(marginals.begin(), marginals.end(), 0.0);
    Coalition mask = 0;
    double prev = v_empty;
    for (size_t pos = 0; pos < order.size(); ++pos) {
        if (pos > 0 && std::abs(v_grand - prev) < tol_trunc) return;
        const int p = order[pos];
        mask |= coalition_bit(p);
        const double cur = game.value(mask);
        marginals[static_cast<size_t>(p)] = cur - prev;
        prev = cur;
    }
}

SvEstimate sampled_walk(const CoalitionGame& game, int64_t m, uint64_t seed,
                        bool antithetic, double tol_trunc, SvMethod label,
                        int walk_length = 0) {
    const int n = game.player_count();
    if (n < 1) throw std::invalid_argument("shapley: need at least one player");
    if (m < 1) throw std::invalid_argument("shapley: m must be >= 1");
    if (antithetic && m % 2 != 0)
        throw std::invalid_argument("antithetic_shapley: m must be even");
    if (walk_length < 0 || walk_length > n)
        throw std::invalid_argument("shapley: permutation length out of range");
    const size_t scan_len = walk_length == 0 ? static_cast<size_t>(n)
                                             : static_cast<size_t>(walk_length);

    const bool truncate = tol_trunc > 0.0;
    const double v_empty = game.value(0);
    const double v_grand = truncate ? game.value(game.grand()) : 0.0;

    Rng rng(seed);
    std::vector<double> sum(static_cast<size_t>(n), 0.0);
    std::vector<double> marg(static_cast<size_t>(n), 0.0);
    const int64_t draws = antithetic ? m / 2 : m;
    for (int64_t l = 0; l < draws; ++l) {
        Permutation pi = Permutation::random(n, rng);
        std::vector<int> head(pi.order.begin(), pi.order.begin() + static_cast<ptrdiff_t>(scan_len));
        std::fill(marg.begin(), marg.end(), 0.0);
        if (truncate)
            scan_permutation_truncated(game, head, v_empty, v_grand, tol_trunc, marg);
        else
            scan_permutation(game, head, v_empty, marg);
        for (int i = 0; i < n; ++i) sum[static_cast<size_t>(i)] += marg[static_cast<size_t>(i)];
        if (antithetic) {
            Permutation rev = pi.reversed();
            head.assign(rev.order.begin(), rev.order.begin() + static_cast<ptrdiff_t>(scan_len));
            std::fill(marg.begin(), marg.end(), 0.0);
            if (truncate)
                scan_permutation_truncated(game, head, v_empty, v_grand, tol_trunc, marg);
            else
                scan_permutation(game, head, v_empty, marg);
            for (int i = 0; i < n; ++i) sum[static_cast<size_t>(i)] += marg[static_cast<size_t>(i)];
        }
    }
    SvEstimate est;
    est.method = label;
    est.samples_used = m;
    est.values.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        est.values[static_cast<size_t>(i)] = sum[static_cast<size_t>(i)] / static_cast<double>(m);
    return est;
}

}  // namespace

SvEstimate mc_shapley(const CoalitionGame& game, int64_t m, uint64_t seed) {
    return sampled_walk(game, m, seed, false, 0.0, SvMethod::Mc);
}

SvEstimate mc_shapley_enumerate_all(const CoalitionGame& game) {
    const int n = game.player_count();
    if (n < 1) throw std::invalid_argument("shapley: need at least one player");
    if (n > 10) throw CapacityError("enumerate_all: N > 10 would walk N! permutations");
    const double v_empty = game.value(0);
    std::vector<int> order = iota_ids(n);
    std::vector<double> sum(static_cast<size_t>(n), 0.0);
    std::vector<double> marg(static_cast<size_t>(n), 0.0);
    int64_t count = 0;
    do {
        scan_permutation(game, order, v_empty, marg);
        for (int i = 0; i < n; ++i) sum[static_cast<size_t>(i)] += marg[static_cast<size_t>(i)];
        ++count;
    } while (std::next_permutation(order.begin(), order.end()));
    SvEstimate est;
    est.method = SvMethod::Mc;
    est.samples_used = count;
    est.values.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        est.values[static_cast<size_t>(i)] = sum[static_cast<size_t>(i)] / static_cast<double>(count);
    return est;
}

SvEstimate antithetic_shapley(const CoalitionGame& game, int64_t m, uint64_t seed) {
    return sampled_walk(game, m, seed, true, 0.0, SvMethod::Antithetic);
}

SvEstimate tamc_shapley(const CoalitionGame& game, int64_t m, double tol_trunc,
                        uint64_t seed) {
    if (tol_trunc < 0.0) throw std::invalid_argument("tamc_shapley: tol_trunc must be >= 0");
    return sampled_walk(game, m, seed, true, tol_trunc, SvMethod::AntitheticTruncated);
}

std::vector<double> truncated_scan(const CoalitionGame& game, const Permutation& pi,
                                   double tol_trunc) {
    if (tol_trunc < 0.0) throw std::invalid_argument("truncated_scan: tol_trunc must be >= 0");
    const int n = game.player_count();
    if (static_cast<int>(pi.order.size()) != n)
        throw ShapeError("truncated_scan: permutation length != player count");
    std::vector<double> marg(static_cast<size_t>(n), 0.0);
    const double v_empty = game.value(0);
    if (tol_trunc > 0.0) {
        const double v_grand = game.value(game.grand());
        scan_permutation_truncated(game, pi.order, v_empty, v_grand, tol_trunc, marg);
    } else {
        scan_permutation(game, pi.order, v_empty, marg);
    }
    return marg;
}

SvEstimate stratified_shapley(const CoalitionGame& game, int64_t m,
                              StratifiedAllocation allocation, uint64_t seed) {
    const int n = game.player_count();
    if (n < 1) throw std::invalid_argument("stratified_shapley: need at least one player");
    const int d = n;  // one stratum per position
    if (m < d) throw std::invalid_argument("stratified_shapley: m must be >= N");

    const double v_empty = game.value(0);
    Rng rng(seed);

    SvEstimate est;
    est.method = SvMethod::Stratified;
    est.samples_used = m;
    est.values.assign(static_cast<size_t>(n), 0.0);

    std::vector<int> others(static_cast<size_t>(n - 1));
    for (int i = 0; i < n; ++i) {
        {
            int pos = 0;
            for (int p = 0; p < n; ++p)
                if (p != i) others[static_cast<size_t>(pos++)] = p;
        }
        const Coalition me = coalition_bit(i);

        // One marginal draw with player i at position l (1-based): a uniform
        // random (l-1)-prefix from the other players.
        auto draw = [&](int l) {
            rng.shuffle(others);
            Coalition prefix = 0;
            for (int j = 0; j < l - 1; ++j) prefix |= coalition_bit(others[static_cast<size_t>(j)]);
            const double before = prefix == 0 ? v_empty : game.value(prefix);
            return game.value(prefix | me) - before;
        };

        std::vector<int64_t> alloc(static_cast<size_t>(d), 0);
        std::vector<double> strat_sum(static_cast<size_t>(d), 0.0);
        if (allocation == StratifiedAllocation::Uniform || m < 2 * d) {
            const int64_t base = m / d;
            const int64_t rem = m % d;
            for (int l = 0; l < d; ++l) alloc[static_cast<size_t>(l)] = base + (l < rem ? 1 : 0);
        } else {
            // Pilot two draws per stratum to estimate its range, then spend
            // the remaining budget proportionally.
            std::vector<double> range(static_cast<size_t>(d), 0.0);
            for (int l = 0; l < d; ++l) {
                const double a = draw(l + 1);
                const double b = draw(l + 1);
                strat_sum[static_cast<size_t>(l)] = a + b;
                alloc[static_cast<size_t>(l)] = 2;
                range[static_cast<size_t>(l)] = std::abs(a - b);
            }
            const double total_range = std::accumulate(range.begin(), range.end(), 0.0);
            int64_t left = m - 2 * d;
            if (total_range > 0.0) {
                int64_t assigned = 0;
                for (int l = 0; l < d; ++l) {
                    const auto extra = static_cast<int64_t>(
                        std::floor(static_cast<double>(left) * range[static_cast<size_t>(l)] / total_range));
                    alloc[static_cast<size_t>(l)] += extra;
                    assigned += extra;
                }
                for (int l = 0; assigned < left; ++l, ++assigned)
                    ++alloc[static_cast<size_t>(l % d)];
            } else {
                for (int l = 0; l < d && left > 0; l = (l + 1) % d, --left)
                    ++alloc[static_cast<size_t>(l)];
            }
            double combined = 0.0;
            for (int l = 0; l < d; ++l) {
                for (int64_t s = 2; s < alloc[static_cast<size_t>(l)]; ++s)
                    strat_sum[static_cast<size_t>(l)] += draw(l + 1);
                combined += strat_sum[static_cast<size_t>(l)] /
                            static_cast<double>(alloc[static_cast<size_t>(l)]);
            }
            est.values[static_cast<size_t>(i)] = combined / static_cast<double>(d);
            continue;
        }
        double combined = 0.0;
        for (int l = 0; l < d; ++l) {
            double s = 0.0;
            for (int64_t k = 0; k < alloc[static_cast<size_t>(l)]; ++k) s += draw(l + 1);
            combined += s / static_cast<double>(alloc[static_cast<size_t>(l)]);
        }
        est.values[static_cast<size_t>(i)] = combined / static_cast<double>(d);
    }
    return est;
}

FlValueFunction::FlValueFunction(std::vector<ParamVector> updates,
                                 std::vector<int64_t> weights,
                                 ParamVector previous_global, ModelSpec spec,
                                 const LabeledDataset* validation, bool memoize)
    : updates_(std::move(updates)),
      weights_(std::move(weights)),
      previous_global_(std::move(previous_global)),
      spec_(spec),
      validation_(validation),
      memoize_(memoize) {
    if (updates_.size() != weights_.size())
        throw ShapeError("FlValueFunction: updates/weights length mismatch");
    if (updates_.empty()) throw EmptyDataError("FlValueFunction: no client updates");
    if (validation_ == nullptr || validation_->empty())
        throw EmptyDataError("FlValueFunction: empty validation set");
    for (const auto& u : updates_)
        if (u.size() != previous_global_.size())
            throw ShapeError("FlValueFunction: update dimension != global model dimension");
}

double FlValueFunction::compute(Coalition coalition) const {
    ++evals_;
    if (coalition == 0)
        return evaluate(previous_global_, spec_, *validation_).accuracy;
    std::vector<ParamVector> members;
    std::vector<int64_t> w;
    for (int i = 0; i < player_count(); ++i) {
        if (coalition & coalition_bit(i)) {
            members.push_back(updates_[static_cast<size_t>(i)]);
            w.push_back(weights_[static_cast<size_t>(i)]);
        }
    }
    return evaluate(fedavg(members, w), spec_, *validation_).accuracy;
}

double FlValueFunction::value(Coalition coalition) const {
    if (!memoize_) return compute(coalition);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = cache_.find(coalition);
        if (it != cache_.end()) return it->second;
    }
    const double v = compute(coalition);
    std::lock_guard<std::mutex> lock(mutex_);
    return cache_.emplace(coalition, v).first->second;  // first writer wins
}

CoalitionGame FlValueFunction::game() const {
    return CoalitionGame(player_count(), [this](Coalition c) { return value(c); });
}

SvEstimate estimate_sv(const FlValueFunction& value_fn, const SvConfig& cfg) {
    const CoalitionGame game = value_fn.game();
    int64_t m = cfg.samples;
    if (cfg.confidence) {
        ConfidenceSpec spec = *cfg.confidence;
        if (cfg.method == SvMethod::Stratified) {
            if (spec.strata < 1) spec.strata = game.player_count();
            m = required_samples(spec, SampleBound::Stratified);
            m = std::max<int64_t>(m, game.player_count());
        } else {
            m = required_samples(spec, SampleBound::Mc);
        }
    }
    switch (cfg.method) {
        case SvMethod::Exact:
            return exact_shapley(game);
        case SvMethod::Mc:
            return sampled_walk(game, m, cfg.seed, false, 0.0, SvMethod::Mc,
                                cfg.permutation_length);
        case SvMethod::Antithetic:
            return sampled_walk(game, m + (m % 2), cfg.seed, true, 0.0,
                                SvMethod::Antithetic, cfg.permutation_length);
        case SvMethod::AntitheticTruncated:
            if (cfg.tol_trunc < 0.0)
                throw std::invalid_argument("estimate_sv: tol_trunc must be >= 0");
            return sampled_walk(game, m + (m % 2), cfg.seed, true, cfg.tol_trunc,
                                SvMethod::AntitheticTruncated, cfg.permutation_length);
        case SvMethod::Stratified:
            return stratified_shapley(game, std::max<int64_t>(m, game.player_count()),
                                      cfg.allocation, cfg.seed);
    }
    throw std::invalid_argument("estimate_sv: unknown method");
}

}  // namespace fedsv
