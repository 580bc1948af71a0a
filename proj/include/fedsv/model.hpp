#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedsv/rng.hpp"

namespace fedsv {

// Flat vector of model parameters, the unit exchanged between clients and
// the server. All entries stay finite through every operation here.
using ParamVector = std::vector<double>;

ParamVector add(const ParamVector& a, const ParamVector& b);
ParamVector scale(const ParamVector& a, double s);
ParamVector negate(const ParamVector& a);
double l2_distance(const ParamVector& a, const ParamVector& b);
double l2_norm(const ParamVector& a);

struct LabeledDataset;  // data.hpp
struct ClientShard;

enum class Arch { Logistic, Mlp1 };

// Architecture descriptor; parameter layout is row-major weights followed
// by biases, layer by layer.
struct ModelSpec {
    Arch arch = Arch::Logistic;
    int input_dim = 0;
    int num_classes = 0;
    int hidden_dim = 0;  // mlp only

    int param_count() const;
};

struct Model {
    ModelSpec spec;
    ParamVector params;
};

struct TrainConfig {
    double learning_rate = 0.005;
    int epochs = 5;
    int batch_size = 25;
    uint64_t seed = 0;
};

// Uniform init in [-0.05, 0.05] from the given seed.
Model make_model(const ModelSpec& spec, uint64_t seed);

// Softmax class probabilities for one sample. Throws ShapeError if the
// feature length does not match the architecture.
std::vector<double> forward(const Model& model, std::span<const double> features);

struct EvalResult {
    double loss = 0.0;      // mean cross-entropy
    double accuracy = 0.0;  // argmax ties go to the lowest class index
};

EvalResult evaluate(const ParamVector& params, const ModelSpec& spec,
                    const LabeledDataset& dataset);

// Mean cross-entropy loss over the dataset together with its gradient,
// computed analytically. Backs both SGD steps and the gradient checks.
double loss_gradient(const Model& model, const LabeledDataset& dataset,
                     std::span<const int> sample_idx, ParamVector& grad_out);

// E epochs of mini-batch SGD on cross-entropy. The input model is left
// untouched; the shuffle order is consumed from `stream`, so E epochs in
// one call equals E single-epoch calls sharing the same stream.
ParamVector local_train(const Model& model, const ClientShard& shard,
                        const TrainConfig& cfg, Rng& stream);

// Convenience overload that opens a fresh stream from cfg.seed.
ParamVector local_train(const Model& model, const ClientShard& shard,
                        const TrainConfig& cfg);

}  // namespace fedsv
