// Audit-side statistical fraud detection: two-sample KS test, Wald test
// against population moments, the combined Bonferroni detector, and its
// false-positive-rate calibration.

#ifndef FOOLSHAP_DETECTION_HPP
#define FOOLSHAP_DETECTION_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>

#include "foolshap/rng.hpp"

namespace foolshap {

struct TestReport {
    double statistic = 0.0;
    double p_value = 1.0;
    std::string test_name;
    std::pair<int, int> sample_sizes{0, 0};
};

// Exact supremum of |ECDF_a - ECDF_b|; p-value from the asymptotic
// Kolmogorov distribution with effective size mn/(m+n).
TestReport ks_two_sample(std::span<const double> a, std::span<const double> b);

// statistic = (mean(sample) - mu) / (sigma / sqrt(M)), two-sided p-value.
// mu and sigma2 are population moments of the full group outputs.
TestReport wald_test(std::span<const double> sample, double mu, double sigma2);

// Algorithm-2 detector: for each group, draw the audit's own reference
// sample of size M from the full group outputs, run KS and Wald, and
// flag iff any of the four p-values falls below alpha/4. A degenerate
// group (zero output variance) skips its Wald test.
bool detect_fraud(std::span<const double> f_d0, std::span<const double> f_d1,
                  std::span<const double> f_s0p, std::span<const double> f_s1p,
                  double alpha, int m, Rng& rng, bool with_replacement = true);

struct CalibrationReport {
    double alpha = 0.0;
    int m = 0;
    int reps = 0;
    double fpr = 0.0;
    // rejections attributed per test: {ks0, wald0, ks1, wald1}
    std::array<int, 4> per_test_rejections{0, 0, 0, 0};
};

// Fraction of replicates where the detector fires on honestly drawn
// subsets. Replicates use per-index derived seeds and may run in parallel.
CalibrationReport calibrate_detector(std::span<const double> f_d0,
                                     std::span<const double> f_d1, double alpha, int m,
                                     int reps, std::uint64_t seed, int threads = 1);

}  // namespace foolshap

#endif
