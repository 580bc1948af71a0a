#pragma once

#include <cstdint>
#include <vector>

#include "fedsv/model.hpp"

namespace fedsv {

// Per-client smoothed Shapley values: sv_bar^t = alpha sv_bar^{t-1} + beta sv^t.
struct SvLedger {
    std::vector<double> smoothed;
    double alpha = 0.3;
    double beta = 0.7;
};

SvLedger make_ledger(int num_clients, double alpha, double beta, double initial = 0.0);

SvLedger update_ledger(const SvLedger& ledger, const std::vector<double>& sv_t);

enum class ThresholdForm {
    SubtractLambda,       // split when cost <= N sigma^2 - lambda
    ScaleOneMinusLambda,  // alternative form: cost <= (1 - lambda) N sigma^2
};

struct ClusFedSpec {
    double lambda = 0.0;  // in [-1, 1]; higher is more conservative
    double min_spread = 1e-9;
    ThresholdForm threshold_form = ThresholdForm::SubtractLambda;
};

// O(1) within-segment sum of squared deviations over an ascending sort,
// after O(N) prefix-sum setup. Positions are 1-based.
class SegmentCost {
public:
    explicit SegmentCost(const std::vector<double>& sorted_values);
    // C(i,j) = sum_{k=i..j} (x_k - mean(x_i..x_j))^2
    double cost(int i, int j) const;
    int size() const { return static_cast<int>(sum_.size()) - 1; }

private:
    std::vector<long double> sum_;
    std::vector<long double> sumsq_;
};

// Regularized 1-vs-2 clustering of smoothed SVs on the line. Returns the
// selected client ids ascending: the high-SV cluster when splitting beats
// one cluster by the lambda penalty, otherwise every client.
std::vector<int> clusfed(const std::vector<double>& sv_bar, const ClusFedSpec& spec);

// fedavg restricted to the selected clients.
ParamVector selected_global_model(const std::vector<ParamVector>& updates,
                                  const std::vector<int64_t>& weights,
                                  const std::vector<int>& selected);

}  // namespace fedsv
