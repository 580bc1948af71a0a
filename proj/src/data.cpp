#include "fedsv/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "fedsv/errors.hpp"
#include "fedsv/rng.hpp"

namespace fedsv {

void LabeledDataset::push_row(std::span<const double> x, int label) {
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(label);
}

namespace {

constexpr uint32_t kImagesMagic = 0x00000803;
constexpr uint32_t kLabelsMagic = 0x00000801;

uint32_t read_be32(std::ifstream& in, const std::string& path) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4))
        throw IdxLengthError("idx: truncated header in " + path);
    return (uint32_t(buf[0]) << 24) | (uint32_t(buf[1]) << 16) |
           (uint32_t(buf[2]) << 8) | uint32_t(buf[3]);
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw MissingFileError("idx: cannot open " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw MissingFileError("idx: cannot open " + labels_path);

    if (read_be32(img, images_path) != kImagesMagic)
        throw IdxFormatError("idx: bad magic number in " + images_path);
    if (read_be32(lab, labels_path) != kLabelsMagic)
        throw IdxFormatError("idx: bad magic number in " + labels_path);

    const uint32_t n_images = read_be32(img, images_path);
    const uint32_t rows = read_be32(img, images_path);
    const uint32_t cols = read_be32(img, images_path);
    const uint32_t n_labels = read_be32(lab, labels_path);
    if (n_images != n_labels)
        throw IdxConsistencyError("idx: image count " + std::to_string(n_images) +
                                  " != label count " + std::to_string(n_labels));

    const size_t dim = static_cast<size_t>(rows) * cols;
    LabeledDataset ds;
    ds.input_dim = static_cast<int>(dim);
    ds.num_classes = 10;
    ds.features.resize(static_cast<size_t>(n_images) * dim);
    ds.labels.resize(n_images);

    std::vector<unsigned char> buf(dim);
    for (uint32_t i = 0; i < n_images; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim)))
            throw IdxLengthError("idx: truncated image data in " + images_path);
        double* out = ds.features.data() + static_cast<size_t>(i) * dim;
        for (size_t j = 0; j < dim; ++j) out[j] = buf[j] / 255.0;
        unsigned char y;
        if (!lab.read(reinterpret_cast<char*>(&y), 1))
            throw IdxLengthError("idx: truncated label data in " + labels_path);
        if (y > 9) throw IdxConsistencyError("idx: label out of range in " + labels_path);
        ds.labels[i] = y;
    }
    return ds;
}

LabeledDataset synth_blobs(int num_classes, int samples_per_class, int input_dim,
                           double spread, uint64_t seed) {
    if (num_classes < 1 || samples_per_class < 1 || input_dim < 1)
        throw std::invalid_argument("synth_blobs: counts must be >= 1");
    if (spread < 0.0) throw std::invalid_argument("synth_blobs: spread must be >= 0");
    LabeledDataset ds;
    ds.input_dim = input_dim;
    ds.num_classes = num_classes;
    ds.features.resize(static_cast<size_t>(num_classes) * samples_per_class * input_dim);
    ds.labels.resize(static_cast<size_t>(num_classes) * samples_per_class);
    Rng rng(seed);
    size_t row = 0;
    for (int c = 0; c < num_classes; ++c) {
        const int vertex_axis = c % input_dim;
        for (int s = 0; s < samples_per_class; ++s, ++row) {
            double* x = ds.features.data() + row * static_cast<size_t>(input_dim);
            for (int j = 0; j < input_dim; ++j) {
                const double center = (j == vertex_axis) ? 3.0 : 0.0;
                x[j] = center + (spread > 0.0 ? rng.normal(0.0, spread) : 0.0);
            }
            ds.labels[row] = c;
        }
    }
    return ds;
}

std::vector<ClientShard> partition_noniid(const LabeledDataset& dataset,
                                          const PartitionSpec& spec,
                                          int malicious_count) {
    const int n = spec.num_clients;
    const int m = spec.num_classes;
    const int cpc = spec.classes_per_client;
    if (malicious_count > n)
        throw std::invalid_argument("partition: malicious_count > num_clients");
    if (cpc > m) throw std::invalid_argument("partition: classes_per_client > num_classes");

    // Entitlement: client i (group k = i % m) holds classes k, k+1, ..., k+cpc-1 mod m.
    std::vector<std::vector<int>> entitled(static_cast<size_t>(m));
    for (int i = 0; i < n; ++i) {
        const int k = i % m;
        for (int j = 0; j < cpc; ++j) entitled[static_cast<size_t>((k + j) % m)].push_back(i);
    }

    std::vector<std::vector<size_t>> class_indices(static_cast<size_t>(m));
    for (size_t s = 0; s < dataset.size(); ++s) {
        const int y = dataset.labels[s];
        if (y < 0 || y >= m) throw PartitionError("partition: label outside [0, m)");
        class_indices[static_cast<size_t>(y)].push_back(s);
    }

    std::vector<std::vector<size_t>> per_client(static_cast<size_t>(n));
    for (int c = 0; c < m; ++c) {
        auto& owners = entitled[static_cast<size_t>(c)];
        auto& idx = class_indices[static_cast<size_t>(c)];
        if (owners.empty())
            throw PartitionError("partition: class " + std::to_string(c) +
                                 " is entitled to no client");
        if (idx.size() < owners.size())
            throw PartitionError("partition: class " + std::to_string(c) + " has " +
                                 std::to_string(idx.size()) + " samples for " +
                                 std::to_string(owners.size()) + " entitled clients");
        Rng rng(derive_seed(spec.seed, "partition-class", static_cast<uint64_t>(c)));
        rng.shuffle(idx);
        // Contiguous equal chunks, remainder to the lowest client ids.
        const size_t base = idx.size() / owners.size();
        const size_t rem = idx.size() % owners.size();
        size_t pos = 0;
        for (size_t o = 0; o < owners.size(); ++o) {
            const size_t take = base + (o < rem ? 1 : 0);
            auto& mine = per_client[static_cast<size_t>(owners[o])];
            mine.insert(mine.end(), idx.begin() + static_cast<ptrdiff_t>(pos),
                        idx.begin() + static_cast<ptrdiff_t>(pos + take));
            pos += take;
        }
    }

    std::vector<ClientShard> shards(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        ClientShard& sh = shards[static_cast<size_t>(i)];
        sh.client_id = i;
        sh.role = i < malicious_count ? Role::Malicious : Role::Honest;
        sh.data.input_dim = dataset.input_dim;
        sh.data.num_classes = dataset.num_classes;
        auto& mine = per_client[static_cast<size_t>(i)];
        std::sort(mine.begin(), mine.end());
        for (size_t s : mine) sh.data.push_row(dataset.row(s), dataset.labels[s]);
        sh.n_k = static_cast<int64_t>(sh.data.size());
        if (sh.n_k < 1)
            throw PartitionError("partition: client " + std::to_string(i) + " got no samples");
    }
    return shards;
}

std::pair<LabeledDataset, LabeledDataset> split_fraction(const LabeledDataset& dataset,
                                                         double fraction, uint64_t seed) {
    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    const size_t n_held = static_cast<size_t>(std::llround(fraction * static_cast<double>(dataset.size())));
    LabeledDataset held, rest;
    held.input_dim = rest.input_dim = dataset.input_dim;
    held.num_classes = rest.num_classes = dataset.num_classes;
    for (size_t i = 0; i < order.size(); ++i) {
        auto& dst = i < n_held ? held : rest;
        dst.push_row(dataset.row(order[i]), dataset.labels[order[i]]);
    }
    return {held, rest};
}

}  // namespace fedsv
