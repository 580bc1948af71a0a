#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace fedsv {

// All randomness in a run flows from one master seed through named
// substreams, so any component can be replayed in isolation.
uint64_t derive_seed(uint64_t master, std::string_view stream,
                     uint64_t a = 0, uint64_t b = 0);

// mt19937_64 plus hand-rolled draws. The standard <random> distributions
// are implementation-defined, which would break the byte-reproducibility
// contract across toolchains; these are not.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n); rejection sampling.
    uint64_t below(uint64_t n);

    // Standard normal via Box-Muller; the spare draw is part of the stream.
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Identity permutation 0..n-1.
std::vector<int> iota_ids(int n);

}  // namespace fedsv
