// Deterministic random number generation. All samplers are implemented
// by hand on top of splitmix64/xoshiro-style state so that results are
// bit-identical across platforms and standard library versions.

#ifndef FOOLSHAP_RNG_HPP
#define FOOLSHAP_RNG_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace foolshap {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // warm up so that small seeds diverge immediately
        splitmix64(state_);
    }

    // Derive an independent child stream, e.g. one per replicate/task.
    Rng child(std::uint64_t index) const {
        std::uint64_t s = state_ ^ (0x9e3779b97f4a7c15ULL * (index + 1));
        return Rng(s);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_int: n must be > 0");
        // rejection sampling to avoid modulo bias
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do { x = next_u64(); } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // standard normal via Box-Muller (cached spare kept out on purpose:
    // a stateless draw keeps parallel splits reproducible)
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // index sampled from unnormalized non-negative weights
    std::size_t weighted_index(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        if (total <= 0.0) throw std::invalid_argument("weighted_index: weights sum to zero");
        double u = uniform() * total;
        double acc = 0.0;
        for (std::size_t j = 0; j + 1 < weights.size(); ++j) {
            acc += weights[j];
            if (u < acc) return j;
        }
        return weights.size() - 1;
    }

    // k draws without replacement from [0, n) via partial Fisher-Yates
    std::vector<int> sample_without_replacement(int n, int k) {
        if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        std::vector<int> out(k);
        for (int i = 0; i < k; ++i) {
            std::uint64_t j = i + uniform_int(static_cast<std::uint64_t>(n - i));
            std::swap(pool[i], pool[j]);
            out[i] = pool[i];
        }
        return out;
    }

private:
    std::uint64_t state_;
};

// Precomputed cumulative weights for repeated categorical draws.
class CategoricalSampler {
public:
    explicit CategoricalSampler(const std::vector<double>& weights) {
        cum_.reserve(weights.size());
        double acc = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw std::invalid_argument("categorical: negative weight");
            acc += w;
            cum_.push_back(acc);
        }
        if (cum_.empty() || acc <= 0.0)
            throw std::invalid_argument("categorical: weights must be non-empty and sum > 0");
        total_ = acc;
    }

    std::size_t draw(Rng& rng) const {
        double u = rng.uniform() * total_;
        std::size_t lo = 0, hi = cum_.size() - 1;
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (cum_[mid] <= u) lo = mid + 1; else hi = mid;
        }
        return lo;
    }

private:
    std::vector<double> cum_;
    double total_ = 0.0;
};

}  // namespace foolshap

#endif
