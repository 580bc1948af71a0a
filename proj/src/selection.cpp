#include "fedsv/selection.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "fedsv/aggregation.hpp"
#include "fedsv/errors.hpp"

namespace fedsv {

SvLedger make_ledger(int num_clients, double alpha, double beta, double initial) {
    SvLedger l;
    l.smoothed.assign(static_cast<size_t>(num_clients), initial);
    l.alpha = alpha;
    l.beta = beta;
    return l;
}

SvLedger update_ledger(const SvLedger& ledger, const std::vector<double>& sv_t) {
    if (sv_t.size() != ledger.smoothed.size())
        throw std::invalid_argument("update_ledger: length mismatch");
    SvLedger out = ledger;
    for (size_t i = 0; i < sv_t.size(); ++i)
        out.smoothed[i] = ledger.alpha * ledger.smoothed[i] + ledger.beta * sv_t[i];
    return out;
}

SegmentCost::SegmentCost(const std::vector<double>& sorted_values) {
    const size_t n = sorted_values.size();
    sum_.assign(n + 1, 0.0L);
    sumsq_.assign(n + 1, 0.0L);
    for (size_t k = 0; k < n; ++k) {
        const long double v = sorted_values[k];
        sum_[k + 1] = sum_[k] + v;
        sumsq_[k + 1] = sumsq_[k] + v * v;
    }
}

double SegmentCost::cost(int i, int j) const {
    if (i < 1 || j < i || j > size())
        throw std::invalid_argument("SegmentCost: invalid range");
    const long double s = sum_[static_cast<size_t>(j)] - sum_[static_cast<size_t>(i - 1)];
    const long double s2 = sumsq_[static_cast<size_t>(j)] - sumsq_[static_cast<size_t>(i - 1)];
    const long double len = static_cast<long double>(j - i + 1);
    const long double c = s2 - s * s / len;
    return c > 0.0L ? static_cast<double>(c) : 0.0;
}

std::vector<int> clusfed(const std::vector<double>& sv_bar, const ClusFedSpec& spec) {
    const int n = static_cast<int>(sv_bar.size());
    if (n < 2) throw std::invalid_argument("clusfed: need at least 2 clients");

    // Ascending sort; equal values ordered by lower client id.
    std::vector<int> order = iota_ids(n);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return sv_bar[static_cast<size_t>(a)] < sv_bar[static_cast<size_t>(b)];
    });
    std::vector<double> sorted(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) sorted[static_cast<size_t>(k)] = sv_bar[static_cast<size_t>(order[k])];

    // No usable signal: keep everyone rather than split arbitrarily.
    if (sorted.back() - sorted.front() < spec.min_spread) return iota_ids(n);

    SegmentCost costs(sorted);
    int best_j = 1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int j = 1; j <= n - 1; ++j) {
        const double c = costs.cost(1, j) + costs.cost(j + 1, n);
        if (c < best_cost) {
            best_cost = c;
            best_j = j;
        }
    }

    const double n_sigma2 = costs.cost(1, n);  // N * sigma^2
    const double threshold = spec.threshold_form == ThresholdForm::SubtractLambda
                                 ? n_sigma2 - spec.lambda
                                 : (1.0 - spec.lambda) * n_sigma2;
    if (best_cost <= threshold) {
        std::vector<int> selected(order.begin() + best_j, order.end());
        std::sort(selected.begin(), selected.end());
        return selected;
    }
    return iota_ids(n);
}

ParamVector selected_global_model(const std::vector<ParamVector>& updates,
                                  const std::vector<int64_t>& weights,
                                  const std::vector<int>& selected) {
    if (selected.empty()) throw EmptySelectionError("selected_global_model: empty selection");
    std::vector<ParamVector> chosen;
    std::vector<int64_t> w;
    chosen.reserve(selected.size());
    for (int id : selected) {
        chosen.push_back(updates.at(static_cast<size_t>(id)));
        w.push_back(weights.at(static_cast<size_t>(id)));
    }
    return fedavg(chosen, w);
}

}  // namespace fedsv
