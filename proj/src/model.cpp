#include "fedsv/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsv/data.hpp"
#include "fedsv/errors.hpp"

namespace fedsv {

ParamVector add(const ParamVector& a, const ParamVector& b) {
    if (a.size() != b.size()) throw ShapeError("add: length mismatch");
    ParamVector out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

ParamVector scale(const ParamVector& a, double s) {
    ParamVector out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
    return out;
}

ParamVector negate(const ParamVector& a) {
    ParamVector out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = -a[i];
    return out;
}

double l2_distance(const ParamVector& a, const ParamVector& b) {
    if (a.size() != b.size()) throw ShapeError("l2_distance: length mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double l2_norm(const ParamVector& a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

int ModelSpec::param_count() const {
    if (arch == Arch::Logistic) return (input_dim + 1) * num_classes;
    return (input_dim + 1) * hidden_dim + (hidden_dim + 1) * num_classes;
}

Model make_model(const ModelSpec& spec, uint64_t seed) {
    Model m;
    m.spec = spec;
    m.params.resize(static_cast<size_t>(spec.param_count()));
    Rng rng(seed);
    for (double& p : m.params) p = rng.uniform(-0.05, 0.05);
    return m;
}

namespace {

// Parameter layout.
// Logistic: W[c][d] at c*D+d, then b[c] at C*D+c.
// Mlp1: W1[h][d], b1[h], W2[c][h], b2[c], in that order.

void softmax_inplace(std::vector<double>& logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& v : logits) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : logits) v /= sum;
}

struct MlpOffsets {
    size_t w1, b1, w2, b2;
};

MlpOffsets mlp_offsets(const ModelSpec& s) {
    const size_t d = static_cast<size_t>(s.input_dim);
    const size_t h = static_cast<size_t>(s.hidden_dim);
    return {0, h * d, h * d + h, h * d + h + static_cast<size_t>(s.num_classes) * h};
}

// Probabilities for one sample; optionally reports the hidden activations
// (mlp) so the backward pass can reuse them.
void forward_sample(const ModelSpec& spec, const ParamVector& p,
                    std::span<const double> x, std::vector<double>& probs,
                    std::vector<double>* hidden) {
    const int d = spec.input_dim;
    const int c = spec.num_classes;
    probs.assign(static_cast<size_t>(c), 0.0);
    if (spec.arch == Arch::Logistic) {
        const size_t bias_off = static_cast<size_t>(c) * d;
        for (int k = 0; k < c; ++k) {
            double z = p[bias_off + k];
            const double* w = p.data() + static_cast<size_t>(k) * d;
            for (int j = 0; j < d; ++j) z += w[j] * x[j];
            probs[static_cast<size_t>(k)] = z;
        }
    } else {
        const int h = spec.hidden_dim;
        const auto off = mlp_offsets(spec);
        std::vector<double> act(static_cast<size_t>(h));
        for (int i = 0; i < h; ++i) {
            double z = p[off.b1 + i];
            const double* w = p.data() + off.w1 + static_cast<size_t>(i) * d;
            for (int j = 0; j < d; ++j) z += w[j] * x[j];
            act[static_cast<size_t>(i)] = std::tanh(z);
        }
        for (int k = 0; k < c; ++k) {
            double z = p[off.b2 + k];
            const double* w = p.data() + off.w2 + static_cast<size_t>(k) * h;
            for (int i = 0; i < h; ++i) z += w[i] * act[static_cast<size_t>(i)];
            probs[static_cast<size_t>(k)] = z;
        }
        if (hidden) *hidden = std::move(act);
    }
    softmax_inplace(probs);
}

}  // namespace

std::vector<double> forward(const Model& model, std::span<const double> features) {
    if (static_cast<int>(features.size()) != model.spec.input_dim)
        throw ShapeError("forward: feature length != input_dim");
    std::vector<double> probs;
    forward_sample(model.spec, model.params, features, probs, nullptr);
    return probs;
}

EvalResult evaluate(const ParamVector& params, const ModelSpec& spec,
                    const LabeledDataset& dataset) {
    if (dataset.empty()) throw EmptyDataError("evaluate: empty dataset");
    if (dataset.input_dim != spec.input_dim)
        throw ShapeError("evaluate: dataset input_dim != model input_dim");
    double loss = 0.0;
    size_t correct = 0;
    std::vector<double> probs;
    for (size_t i = 0; i < dataset.size(); ++i) {
        forward_sample(spec, params, dataset.row(i), probs, nullptr);
        const int y = dataset.labels[i];
        loss -= std::log(probs[static_cast<size_t>(y)]);
        int best = 0;
        for (int k = 1; k < spec.num_classes; ++k)
            if (probs[static_cast<size_t>(k)] > probs[static_cast<size_t>(best)]) best = k;
        if (best == y) ++correct;
    }
    const double n = static_cast<double>(dataset.size());
    return {loss / n, static_cast<double>(correct) / n};
}

double loss_gradient(const Model& model, const LabeledDataset& dataset,
                     std::span<const int> sample_idx, ParamVector& grad_out) {
    const ModelSpec& spec = model.spec;
    const ParamVector& p = model.params;
    const int d = spec.input_dim;
    const int c = spec.num_classes;
    grad_out.assign(p.size(), 0.0);
    double loss = 0.0;
    std::vector<double> probs;
    std::vector<double> hidden;
    for (int idx : sample_idx) {
        const auto x = dataset.row(static_cast<size_t>(idx));
        const int y = dataset.labels[static_cast<size_t>(idx)];
        forward_sample(spec, p, x, probs, &hidden);
        loss -= std::log(probs[static_cast<size_t>(y)]);
        if (spec.arch == Arch::Logistic) {
            const size_t bias_off = static_cast<size_t>(c) * d;
            for (int k = 0; k < c; ++k) {
                const double delta = probs[static_cast<size_t>(k)] - (k == y ? 1.0 : 0.0);
                double* gw = grad_out.data() + static_cast<size_t>(k) * d;
                for (int j = 0; j < d; ++j) gw[j] += delta * x[j];
                grad_out[bias_off + k] += delta;
            }
        } else {
            const int h = spec.hidden_dim;
            const auto off = mlp_offsets(spec);
            std::vector<double> dhidden(static_cast<size_t>(h), 0.0);
            for (int k = 0; k < c; ++k) {
                const double delta = probs[static_cast<size_t>(k)] - (k == y ? 1.0 : 0.0);
                double* gw = grad_out.data() + off.w2 + static_cast<size_t>(k) * h;
                const double* w = p.data() + off.w2 + static_cast<size_t>(k) * h;
                for (int i = 0; i < h; ++i) {
                    gw[i] += delta * hidden[static_cast<size_t>(i)];
                    dhidden[static_cast<size_t>(i)] += delta * w[i];
                }
                grad_out[off.b2 + k] += delta;
            }
            for (int i = 0; i < h; ++i) {
                // tanh'(z) = 1 - tanh(z)^2
                const double hi = hidden[static_cast<size_t>(i)];
                const double da = dhidden[static_cast<size_t>(i)] * (1.0 - hi * hi);
                double* gw = grad_out.data() + off.w1 + static_cast<size_t>(i) * d;
                for (int j = 0; j < d; ++j) gw[j] += da * x[j];
                grad_out[off.b1 + i] += da;
            }
        }
    }
    const double n = static_cast<double>(sample_idx.size());
    for (double& g : grad_out) g /= n;
    return loss / n;
}

ParamVector local_train(const Model& model, const ClientShard& shard,
                        const TrainConfig& cfg, Rng& stream) {
    if (shard.data.empty()) throw EmptyDataError("local_train: empty shard");
    Model work = model;  // caller's model stays untouched
    const size_t n = shard.data.size();
    std::vector<int> order(n);
    ParamVector grad;
    for (int e = 0; e < cfg.epochs; ++e) {
        // Fresh identity order per epoch, so E epochs in one call match E
        // single-epoch calls that share the stream.
        std::iota(order.begin(), order.end(), 0);
        stream.shuffle(order);
        double epoch_loss = 0.0;
        size_t batches = 0;
        for (size_t start = 0; start < n; start += static_cast<size_t>(cfg.batch_size)) {
            const size_t len = std::min(static_cast<size_t>(cfg.batch_size), n - start);
            const std::span<const int> batch(order.data() + start, len);
            epoch_loss += loss_gradient(work, shard.data, batch, grad);
            ++batches;
            for (size_t i = 0; i < grad.size(); ++i)
                work.params[i] -= cfg.learning_rate * grad[i];
        }
        if (!std::isfinite(epoch_loss / static_cast<double>(batches)))
            throw DivergenceError(e);
    }
    return work.params;
}

ParamVector local_train(const Model& model, const ClientShard& shard,
                        const TrainConfig& cfg) {
    Rng stream(cfg.seed);
    return local_train(model, shard, cfg, stream);
}

}  // namespace fedsv
