#include "fedsv/attacks.hpp"

#include "fedsv/errors.hpp"
#include "fedsv/rng.hpp"

namespace fedsv {

ParamVector sign_flip(const ParamVector& update) { return negate(update); }

ParamVector gaussian_noise(const ParamVector& update, double sigma, uint64_t seed) {
    if (sigma <= 0.0) throw std::invalid_argument("gaussian_noise: sigma must be > 0");
    Rng rng(seed);
    ParamVector out(update.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = update[i] + rng.normal(0.0, sigma);
    return out;
}

ClientShard backdoor_label_flip(const ClientShard& shard, int source_class,
                                int target_class) {
    if (source_class == target_class)
        throw std::invalid_argument("backdoor: source and target class must differ");
    if (source_class < 0 || source_class >= shard.data.num_classes ||
        target_class < 0 || target_class >= shard.data.num_classes)
        throw std::invalid_argument("backdoor: class index out of range");
    ClientShard flipped = shard;
    for (int& y : flipped.data.labels)
        if (y == source_class) y = target_class;
    return flipped;
}

ParamVector apply_attack(const ClientShard& client, const ParamVector& honest_update,
                         const AttackSpec& spec, const AttackContext& ctx, int round,
                         uint64_t seed) {
    if (client.role == Role::Honest) return honest_update;
    if (round < spec.start_round) return honest_update;
    switch (spec.kind) {
        case AttackKind::None:
            return honest_update;
        case AttackKind::SignFlip:
            return sign_flip(honest_update);
        case AttackKind::GaussianNoise:
            return gaussian_noise(honest_update, spec.noise_sigma, seed);
        case AttackKind::BackdoorLabelFlip: {
            if (ctx.global_model == nullptr)
                throw std::invalid_argument("apply_attack: backdoor needs the global model");
            const ClientShard poisoned =
                backdoor_label_flip(client, spec.source_class, spec.target_class);
            return local_train(*ctx.global_model, poisoned, ctx.train);
        }
    }
    return honest_update;
}

}  // namespace fedsv
