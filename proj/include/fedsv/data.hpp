#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fedsv {

struct LabeledDataset {
    std::vector<double> features;  // row-major, size() == rows * input_dim
    std::vector<int> labels;       // class indices in [0, num_classes)
    int input_dim = 0;
    int num_classes = 0;

    size_t size() const { return labels.size(); }
    bool empty() const { return labels.empty(); }

    std::span<const double> row(size_t i) const {
        return {features.data() + i * static_cast<size_t>(input_dim),
                static_cast<size_t>(input_dim)};
    }

    void push_row(std::span<const double> x, int label);
};

enum class Role { Honest, Malicious };

struct ClientShard {
    int client_id = 0;
    LabeledDataset data;
    int64_t n_k = 0;  // == data.size()
    Role role = Role::Honest;
};

struct PartitionSpec {
    int num_clients = 20;
    int num_classes = 10;
    int classes_per_client = 3;
    uint64_t seed = 0;
};

// IDX-format MNIST reader. Pixels come back in [0,1] (divided by 255).
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

// Gaussian blobs: class c is centered on the scaled one-hot corner
// 3 * e_{c % input_dim}; `spread` is the isotropic noise stddev, so the
// spread -> 0 limit puts every sample exactly on its class vertex.
LabeledDataset synth_blobs(int num_classes, int samples_per_class, int input_dim,
                           double spread, uint64_t seed);

// The 3-classes-per-client label partition: client i belongs to group
// k = i % m and holds samples only from classes k, (k+1)%m, (k+2)%m.
// Each class is split equally among the clients entitled to it, remainder
// to the lowest client ids. Clients 0..malicious_count-1 are malicious.
std::vector<ClientShard> partition_noniid(const LabeledDataset& dataset,
                                          const PartitionSpec& spec,
                                          int malicious_count);

// Deterministic split of `dataset` into a held-out fraction and the rest
// (seeded shuffle, then cut). Used to carve the server validation set out
// of the test split.
std::pair<LabeledDataset, LabeledDataset> split_fraction(const LabeledDataset& dataset,
                                                         double fraction, uint64_t seed);

}  // namespace fedsv
