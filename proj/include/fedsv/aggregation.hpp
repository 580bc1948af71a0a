#pragma once

#include <cstdint>
#include <vector>

#include "fedsv/model.hpp"

namespace fedsv {

enum class AggregatorKind { FedAvg, TrimmedMean, CoordMedian, MultiKrum };
enum class Knowledge { Full, Partial };

struct AggregatorSpec {
    AggregatorKind kind = AggregatorKind::FedAvg;
    int trim_count = 0;       // trimmed_mean: b, requires 2b < N
    int byzantine_count = 0;  // multi_krum: f, requires N - f - 2 >= 1
    int selection_size = 1;   // multi_krum
    Knowledge knowledge = Knowledge::Partial;
};

// Sample-count-weighted mean of client updates.
ParamVector fedavg(const std::vector<ParamVector>& updates,
                   const std::vector<int64_t>& weights);

// Per-coordinate median; even counts average the two middle values.
ParamVector coord_median(const std::vector<ParamVector>& updates);

// Per coordinate, drop the b smallest and b largest values and average the rest.
ParamVector trimmed_mean(const std::vector<ParamVector>& updates, int b);

struct MultiKrumResult {
    ParamVector aggregate;      // plain mean of the selected updates
    std::vector<int> selected;  // ascending ids
};

// Krum scoring: each update's score is the sum of squared L2 distances to
// its N - f - 2 nearest other updates; the selection_size lowest scores win
// (ties to the lowest id).
MultiKrumResult multi_krum(const std::vector<ParamVector>& updates, int f,
                           int selection_size);

}  // namespace fedsv
