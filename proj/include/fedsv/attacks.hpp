#pragma once

#include <cstdint>

#include "fedsv/data.hpp"
#include "fedsv/model.hpp"

namespace fedsv {

enum class AttackKind { None, SignFlip, GaussianNoise, BackdoorLabelFlip };

struct AttackSpec {
    AttackKind kind = AttackKind::None;
    double noise_sigma = 0.5;  // gaussian only
    int source_class = 0;      // backdoor only
    int target_class = 1;
    int start_round = 0;
};

// Negate every weight; the L2 norm is preserved exactly.
ParamVector sign_flip(const ParamVector& update);

ParamVector gaussian_noise(const ParamVector& update, double sigma, uint64_t seed);

// Relabel every source_class sample as target_class; features untouched.
ClientShard backdoor_label_flip(const ClientShard& shard, int source_class,
                                int target_class);

// What a backdoor attacker needs to retrain: the broadcast global model and
// the round's training configuration (including the client's train seed).
struct AttackContext {
    const Model* global_model = nullptr;
    TrainConfig train;
};

// Applies the configured transformation to a malicious client's update from
// spec.start_round on. Honest clients pass through untouched.
ParamVector apply_attack(const ClientShard& client, const ParamVector& honest_update,
                         const AttackSpec& spec, const AttackContext& ctx, int round,
                         uint64_t seed);

}  // namespace fedsv
