#include "foolshap/shapley.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <thread>

#include "foolshap/stats.hpp"
#include "json.hpp"

namespace foolshap {

using nlohmann::json;

std::vector<double> replace(std::span<const double> z, std::span<const double> x,
                            const std::vector<int>& S) {
    if (z.size() != x.size())
        throw std::invalid_argument("replace: x and z have different lengths");
    std::vector<double> out(z.begin(), z.end());
    for (int i : S) {
        if (i < 0 || i >= static_cast<int>(z.size()))
            throw std::out_of_range("replace: feature index out of range");
        out[i] = x[i];
    }
    return out;
}

namespace {

// Shapley kernel weights w[t] = t! (a-1-t)! / a! for subsets of size t
std::vector<double> subset_weights(int a) {
    std::vector<double> fact(a + 1, 1.0);
    for (int i = 1; i <= a; ++i) fact[i] = fact[i - 1] * i;
    std::vector<double> w(a);
    for (int t = 0; t < a; ++t) w[t] = fact[t] * fact[a - 1 - t] / fact[a];
    return w;
}

// body(block_index, lo, hi); blocks are contiguous so merges stay deterministic
void run_partitioned(int n_items, int threads, const std::function<void(int, int, int)>& body) {
    if (threads <= 1 || n_items < 2 * threads) {
        body(0, 0, n_items);
        return;
    }
    std::vector<std::thread> pool;
    int chunk = (n_items + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        int lo = t * chunk;
        int hi = std::min(n_items, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back(body, t, lo, hi);
    }
    for (auto& th : pool) th.join();
}

}  // namespace

AttributionVector local_shapley(const Model& f, std::span<const double> x,
                                std::span<const double> z, int enum_cap) {
    const int d = static_cast<int>(x.size());
    if (static_cast<int>(z.size()) != d)
        throw std::invalid_argument("local_shapley: x and z have different lengths");
    std::vector<int> active = f.active_features(d);
    const int a = static_cast<int>(active.size());
    if (a > enum_cap)
        throw std::runtime_error(
            "local_shapley: " + std::to_string(a) + " active features exceed the enumeration cap of " +
            std::to_string(enum_cap) + "; group one-hot blocks or raise the cap");

    AttributionVector out;
    out.phi.assign(d, 0.0);
    if (a == 0) return out;

    // model value on every masked input
    const std::uint32_t n_masks = 1u << a;
    std::vector<double> vals(n_masks);
    std::vector<double> v(z.begin(), z.end());
    for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
        // gray-code order keeps the working vector update to a single coordinate
        std::uint32_t gray = mask ^ (mask >> 1);
        if (mask > 0) {
            std::uint32_t prev = (mask - 1) ^ ((mask - 1) >> 1);
            std::uint32_t flipped = gray ^ prev;
            int k = std::countr_zero(flipped);
            v[active[k]] = (gray & flipped) ? x[active[k]] : z[active[k]];
        }
        vals[gray] = f.predict(v);
    }

    const std::vector<double> w = subset_weights(a);
    for (int k = 0; k < a; ++k) {
        const std::uint32_t bit = 1u << k;
        double acc = 0.0;
        for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
            if (mask & bit) continue;
            acc += w[std::popcount(mask)] * (vals[mask | bit] - vals[mask]);
        }
        out.phi[active[k]] = acc;
    }
    return out;
}

AttributionVector global_shapley_mc(const Model& f,
                                    const std::vector<std::vector<double>>& s0,
                                    const std::vector<std::vector<double>>& s1,
                                    int enum_cap, int threads) {
    if (s0.empty() || s1.empty())
        throw std::invalid_argument("global_shapley_mc: empty sample set");
    const int d = static_cast<int>(s0.front().size());
    const int n0 = static_cast<int>(s0.size());
    const int n1 = static_cast<int>(s1.size());

    std::vector<std::vector<double>> partial(std::max(threads, 1),
                                             std::vector<double>(d, 0.0));
    run_partitioned(n0, threads, [&](int block, int lo, int hi) {
        std::vector<double> acc(d, 0.0);
        for (int i = lo; i < hi; ++i) {
            for (int j = 0; j < n1; ++j) {
                AttributionVector lsv = local_shapley(f, s0[i], s1[j], enum_cap);
                for (int k = 0; k < d; ++k) acc[k] += lsv.phi[k];
            }
        }
        partial[block] = std::move(acc);
    });

    AttributionVector out;
    out.phi.assign(d, 0.0);
    for (const auto& acc : partial)
        for (int k = 0; k < d; ++k) out.phi[k] += acc[k];
    const double scale = 1.0 / (static_cast<double>(n0) * static_cast<double>(n1));
    for (double& p : out.phi) p *= scale;
    return out;
}

BackgroundCoefficients per_background_coeffs(const Model& f,
                                             const std::vector<std::vector<double>>& s0_prime,
                                             const std::vector<std::vector<double>>& d1,
                                             int sensitive_index, int enum_cap, int threads) {
    if (s0_prime.empty() || d1.empty())
        throw std::invalid_argument("per_background_coeffs: empty sample set");
    const int d = static_cast<int>(s0_prime.front().size());
    if (sensitive_index < 0 || sensitive_index >= d)
        throw std::out_of_range("per_background_coeffs: sensitive index out of range");
    const int n1 = static_cast<int>(d1.size());

    BackgroundCoefficients bc;
    bc.sensitive_index = sensitive_index;
    bc.per_feature.assign(d, std::vector<double>(n1, 0.0));

    run_partitioned(n1, threads, [&](int, int lo, int hi) {
        for (int j = lo; j < hi; ++j) {
            std::vector<double> acc(d, 0.0);
            for (const auto& x : s0_prime) {
                AttributionVector lsv = local_shapley(f, x, d1[j], enum_cap);
                for (int k = 0; k < d; ++k) acc[k] += lsv.phi[k];
            }
            for (int k = 0; k < d; ++k)
                bc.per_feature[k][j] = acc[k] / static_cast<double>(s0_prime.size());
        }
    });

    bc.coeffs = bc.per_feature[sensitive_index];
    return bc;
}

double weighted_gsv(std::span<const double> coeffs, std::span<const double> omega) {
    if (coeffs.size() != omega.size())
        throw std::invalid_argument("weighted_gsv: length mismatch");
    double total = 0.0;
    for (double w : omega) {
        if (w < -1e-12) throw std::runtime_error("weighted_gsv: negative weight");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::runtime_error("weighted_gsv: weights are off the simplex");
    double acc = 0.0;
    for (std::size_t j = 0; j < coeffs.size(); ++j) acc += omega[j] * coeffs[j];
    return acc;
}

ConfidenceInterval gsv_confidence_interval(const Model& f,
                                           const std::vector<std::vector<double>>& s0,
                                           const std::vector<std::vector<double>>& s1,
                                           int feature, double delta, int enum_cap) {
    if (s0.size() != s1.size())
        throw std::invalid_argument("gsv_confidence_interval: |S0| must equal |S1|");
    const int m = static_cast<int>(s0.size());
    if (m < 2) throw std::invalid_argument("gsv_confidence_interval: need M >= 2");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("gsv_confidence_interval: delta must lie in (0,1)");

    std::vector<std::vector<double>> h(m, std::vector<double>(m));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            h[i][j] = local_shapley(f, s0[i], s1[j], enum_cap).phi[feature];

    std::vector<double> row_means(m, 0.0), col_means(m, 0.0);
    double center = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            row_means[i] += h[i][j];
            col_means[j] += h[i][j];
            center += h[i][j];
        }
    for (int i = 0; i < m; ++i) {
        row_means[i] /= m;
        col_means[i] /= m;
    }
    center /= static_cast<double>(m) * m;

    double s10 = sample_variance(row_means);
    double s01 = sample_variance(col_means);
    double q = normal_quantile(1.0 - delta / 2.0);
    ConfidenceInterval ci;
    ci.center = center;
    // two-sample U-statistic CLT with |S0| = |S1| = M: the asymptotic
    // variance is (sigma10^2 + sigma01^2) / M
    ci.half_width = q / std::sqrt(static_cast<double>(m)) * std::sqrt(s10 + s01);
    ci.level = 1.0 - delta;
    return ci;
}

void save_coeff_cache(const std::filesystem::path& dir, const std::string& key,
                      const BackgroundCoefficients& bc,
                      const std::vector<std::string>& feature_names,
                      std::uint64_t model_hash_value,
                      const std::vector<int>& background_ids) {
    std::filesystem::create_directories(dir);
    const int d = static_cast<int>(bc.per_feature.size());
    const int n1 = d > 0 ? static_cast<int>(bc.per_feature.front().size()) : 0;

    std::ofstream bin(dir / (key + ".bin"), std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write coefficient cache payload");
    for (int k = 0; k < d; ++k)
        for (int j = 0; j < n1; ++j) {
            double v = bc.per_feature[k][j];
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            unsigned char le[8];
            for (int b = 0; b < 8; ++b) le[b] = static_cast<unsigned char>(bits >> (8 * b));
            bin.write(reinterpret_cast<const char*>(le), 8);
        }

    json side{{"rows", d},
              {"cols", n1},
              {"model_hash", model_hash_value},
              {"sensitive_index", bc.sensitive_index},
              {"foreground_ids", bc.foreground_ids},
              {"background_ids", background_ids},
              {"feature_names", feature_names}};
    std::ofstream js(dir / (key + ".json"));
    if (!js) throw std::runtime_error("cannot write coefficient cache sidecar");
    js << side.dump(2) << "\n";
}

std::optional<BackgroundCoefficients> load_coeff_cache(const std::filesystem::path& dir,
                                                       const std::string& key,
                                                       std::uint64_t model_hash_value,
                                                       const std::vector<int>& foreground_ids,
                                                       const std::vector<int>& background_ids) {
    std::ifstream js(dir / (key + ".json"));
    if (!js) return std::nullopt;
    json side;
    try {
        js >> side;
    } catch (const json::exception&) {
        return std::nullopt;
    }
    if (side.value("model_hash", std::uint64_t{0}) != model_hash_value) return std::nullopt;
    if (side.value("foreground_ids", std::vector<int>{}) != foreground_ids) return std::nullopt;
    if (side.value("background_ids", std::vector<int>{}) != background_ids) return std::nullopt;

    const int d = side.at("rows").get<int>();
    const int n1 = side.at("cols").get<int>();
    std::ifstream bin(dir / (key + ".bin"), std::ios::binary);
    if (!bin) return std::nullopt;

    BackgroundCoefficients bc;
    bc.sensitive_index = side.at("sensitive_index").get<int>();
    bc.foreground_ids = foreground_ids;
    bc.per_feature.assign(d, std::vector<double>(n1));
    for (int k = 0; k < d; ++k)
        for (int j = 0; j < n1; ++j) {
            unsigned char le[8];
            bin.read(reinterpret_cast<char*>(le), 8);
            if (!bin) return std::nullopt;
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(le[b]) << (8 * b);
            double v;
            std::memcpy(&v, &bits, 8);
            bc.per_feature[k][j] = v;
        }
    bc.coeffs = bc.per_feature[bc.sensitive_index];
    return bc;
}

}  // namespace foolshap
