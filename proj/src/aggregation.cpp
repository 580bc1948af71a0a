#include "fedsv/aggregation.hpp"

#include <algorithm>
#include <numeric>

#include "fedsv/errors.hpp"

namespace fedsv {

namespace {

void check_same_dim(const std::vector<ParamVector>& updates) {
    for (const auto& u : updates)
        if (u.size() != updates.front().size())
            throw ShapeError("aggregation: updates differ in dimension");
}

}  // namespace

ParamVector fedavg(const std::vector<ParamVector>& updates,
                   const std::vector<int64_t>& weights) {
    if (updates.empty()) throw EmptySelectionError("fedavg: empty selection");
    if (updates.size() != weights.size())
        throw ShapeError("fedavg: updates/weights length mismatch");
    check_same_dim(updates);
    double total = 0.0;
    for (int64_t w : weights) {
        if (w <= 0) throw std::invalid_argument("fedavg: weights must be positive");
        total += static_cast<double>(w);
    }
    ParamVector out(updates.front().size(), 0.0);
    for (size_t k = 0; k < updates.size(); ++k) {
        const double w = static_cast<double>(weights[k]) / total;
        const ParamVector& u = updates[k];
        for (size_t i = 0; i < out.size(); ++i) out[i] += w * u[i];
    }
    return out;
}

ParamVector coord_median(const std::vector<ParamVector>& updates) {
    if (updates.empty()) throw EmptySelectionError("coord_median: empty input");
    check_same_dim(updates);
    const size_t n = updates.size();
    const size_t dim = updates.front().size();
    ParamVector out(dim);
    std::vector<double> col(n);
    for (size_t i = 0; i < dim; ++i) {
        for (size_t k = 0; k < n; ++k) col[k] = updates[k][i];
        std::sort(col.begin(), col.end());
        out[i] = (n % 2 == 1) ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
    }
    return out;
}

ParamVector trimmed_mean(const std::vector<ParamVector>& updates, int b) {
    if (updates.empty()) throw EmptySelectionError("trimmed_mean: empty input");
    if (b < 0) throw std::invalid_argument("trimmed_mean: b must be >= 0");
    const size_t n = updates.size();
    if (2 * static_cast<size_t>(b) >= n)
        throw std::invalid_argument("trimmed_mean: 2b must be < count");
    check_same_dim(updates);
    const size_t dim = updates.front().size();
    ParamVector out(dim);
    std::vector<double> col(n);
    for (size_t i = 0; i < dim; ++i) {
        for (size_t k = 0; k < n; ++k) col[k] = updates[k][i];
        std::sort(col.begin(), col.end());
        double s = 0.0;
        for (size_t k = static_cast<size_t>(b); k < n - static_cast<size_t>(b); ++k) s += col[k];
        out[i] = s / static_cast<double>(n - 2 * static_cast<size_t>(b));
    }
    return out;
}

MultiKrumResult multi_krum(const std::vector<ParamVector>& updates, int f,
                           int selection_size) {
    const int n = static_cast<int>(updates.size());
    if (n - f - 2 < 1)
        throw std::invalid_argument("multi_krum: need N - f - 2 >= 1");
    if (selection_size < 1 || selection_size > n)
        throw std::invalid_argument("multi_krum: selection_size out of range");
    check_same_dim(updates);

    std::vector<std::vector<double>> sq(static_cast<size_t>(n),
                                        std::vector<double>(static_cast<size_t>(n), 0.0));
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double d = l2_distance(updates[static_cast<size_t>(i)], updates[static_cast<size_t>(j)]);
            sq[static_cast<size_t>(i)][static_cast<size_t>(j)] = d * d;
            sq[static_cast<size_t>(j)][static_cast<size_t>(i)] = d * d;
        }
    }
    const int nearest = n - f - 2;
    std::vector<double> score(static_cast<size_t>(n));
    std::vector<double> others;
    for (int i = 0; i < n; ++i) {
        others.clear();
        for (int j = 0; j < n; ++j)
            if (j != i) others.push_back(sq[static_cast<size_t>(i)][static_cast<size_t>(j)]);
        std::sort(others.begin(), others.end());
        double s = 0.0;
        for (int k = 0; k < nearest; ++k) s += others[static_cast<size_t>(k)];
        score[static_cast<size_t>(i)] = s;
    }

    std::vector<int> ids(static_cast<size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
        return score[static_cast<size_t>(a)] < score[static_cast<size_t>(b)];
    });
    ids.resize(static_cast<size_t>(selection_size));
    std::sort(ids.begin(), ids.end());

    std::vector<ParamVector> chosen;
    chosen.reserve(ids.size());
    for (int id : ids) chosen.push_back(updates[static_cast<size_t>(id)]);
    std::vector<int64_t> equal(ids.size(), 1);
    return {fedavg(chosen, equal), std::move(ids)};
}

}  // namespace fedsv
