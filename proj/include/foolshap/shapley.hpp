// Exact interventional Local Shapley Values by subset enumeration, the
// Monte-Carlo plug-in Global Shapley Values, the per-background
// coefficients consumed by the weight optimizer, and an asymptotic-normal
// confidence interval for GSV components.

#ifndef FOOLSHAP_SHAPLEY_HPP
#define FOOLSHAP_SHAPLEY_HPP

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "foolshap/model.hpp"

namespace foolshap {

struct AttributionVector {
    std::vector<double> phi;
    std::vector<std::string> feature_names;
};

struct BackgroundCoefficients {
    std::vector<double> coeffs;       // per background instance, sensitive feature
    int sensitive_index = -1;
    std::vector<int> foreground_ids;  // the fixed foreground sample S0'
    // full per-feature coefficient matrix, per_feature[k][j] for feature k,
    // background j; coeffs aliases row sensitive_index
    std::vector<std::vector<double>> per_feature;
};

struct ConfidenceInterval {
    double center = 0.0;
    double half_width = 0.0;
    double level = 0.0;
};

// output_i = x_i if i in S else z_i
std::vector<double> replace(std::span<const double> z, std::span<const double> x,
                            const std::vector<int>& S);

// Exact LSV. Enumeration runs over the model's active features only;
// inactive ones get an exactly-zero attribution by the dummy axiom. The
// cap bounds the number of enumerated features (cost is O(2^a) model calls).
AttributionVector local_shapley(const Model& f, std::span<const double> x,
                                std::span<const double> z, int enum_cap = 15);

// Plug-in estimate: average of LSV over all foreground/background pairs.
AttributionVector global_shapley_mc(const Model& f,
                                    const std::vector<std::vector<double>>& s0,
                                    const std::vector<std::vector<double>>& s1,
                                    int enum_cap = 15, int threads = 1);

// coeffs[j] = mean over x in S0' of phi_s(f, x, z_j); the full d x N1
// matrix is materialized alongside.
BackgroundCoefficients per_background_coeffs(const Model& f,
                                             const std::vector<std::vector<double>>& s0_prime,
                                             const std::vector<std::vector<double>>& d1,
                                             int sensitive_index, int enum_cap = 15,
                                             int threads = 1);

// sum_j omega_j * coeffs[j]; omega must lie on the simplex within 1e-9
double weighted_gsv(std::span<const double> coeffs, std::span<const double> omega);

// Proposition-style CI from the empirical variances of row/column means
// of the LSV matrix; requires |S0| = |S1| = M >= 2.
ConfidenceInterval gsv_confidence_interval(const Model& f,
                                           const std::vector<std::vector<double>>& s0,
                                           const std::vector<std::vector<double>>& s1,
                                           int feature, double delta, int enum_cap = 15);

// On-disk cache for coefficient matrices: little-endian f64 payload with a
// JSON sidecar carrying dims, model hash, sample ids and feature names.
void save_coeff_cache(const std::filesystem::path& dir, const std::string& key,
                      const BackgroundCoefficients& bc,
                      const std::vector<std::string>& feature_names,
                      std::uint64_t model_hash_value,
                      const std::vector<int>& background_ids);
std::optional<BackgroundCoefficients> load_coeff_cache(const std::filesystem::path& dir,
                                                       const std::string& key,
                                                       std::uint64_t model_hash_value,
                                                       const std::vector<int>& foreground_ids,
                                                       const std::vector<int>& background_ids);

}  // namespace foolshap

#endif
