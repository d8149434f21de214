// The end-to-end background-biasing attack (lambda grid search over
// min-cost-flow weight solves, gated by the audit detector), plus the
// brute-force and genetic baselines it is compared against.

#ifndef FOOLSHAP_ATTACK_HPP
#define FOOLSHAP_ATTACK_HPP

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "foolshap/data.hpp"
#include "foolshap/shapley.hpp"
#include "foolshap/transport.hpp"

namespace foolshap {

struct AttackConfig {
    int m = 100;                 // subset size handed to the audit
    double lambda_min = -1.0;    // < 0 means auto-scale from the data
    double lambda_max = -1.0;
    int grid_size = 20;
    double tau = 0.1;            // detection-rate acceptance threshold
    double alpha = 0.05;
    int detection_reps = 100;
    std::uint64_t seed = 0;
    int threads = 1;
    int bootstrap_replicates = 5;
    int max_solve_n1 = 2000;     // bootstrap kicks in above this
    int enum_cap = 15;
};

struct LambdaTrace {
    double lambda = 0.0;
    double weighted_gsv_s = 0.0;
    std::vector<double> weighted_gsv_all;
    double detection_rate = 0.0;
    double wasserstein_cost = 0.0;
    bool accepted = false;
};

struct AttackResult {
    double chosen_lambda = 0.0;
    BackgroundWeights weights;
    std::vector<int> s0_prime;  // instance ids into the dataset
    std::vector<int> s1_prime;
    double phi_before = 0.0;    // sensitive GSV under the uniform background
    double phi_after = 0.0;
    AttributionVector gsv_before;
    AttributionVector gsv_after;
    double detection_rate = 0.0;           // re-measured on the final weights
    double acceptance_detection_rate = 0.0;  // rate at acceptance time
    double amplitude_reduction = 0.0;
    bool fell_back_to_uniform = false;
    std::vector<LambdaTrace> trace;
    std::string method = "fool-shap";
    long draws = 0;  // brute-force only
    // genetic only: the evolved fake background rows and the early-stop flag
    std::vector<std::vector<double>> fake_rows;
    bool genetic_early_stop = false;
};

// Detection rate of the audit against subsets drawn from the weighted
// background: fraction of reps where the detector fires.
double detection_rate(std::span<const double> omega, const Model& f, const Dataset& ds,
                      const GroupSplit& split, const std::vector<int>& s0_prime, int m,
                      double alpha, int reps, Rng& rng);

AttackResult fool_shap(const Model& f, const Dataset& ds, const GroupSplit& split,
                       const AttackConfig& cfg);

// Repeatedly draws honest-looking subsets and keeps the one with the
// smallest sensitive GSV magnitude. Each draw recomputes the plug-in GSV
// from scratch, which is what the wall-clock budget is meant to price.
AttackResult brute_force_attack(const Model& f, const Dataset& ds, const GroupSplit& split,
                                const std::vector<int>& s0_prime, int m,
                                std::chrono::duration<double> time_budget, Rng& rng,
                                std::optional<long> max_draws = std::nullopt,
                                int enum_cap = 15);

using DetectorFn = std::function<bool(const std::vector<std::vector<double>>&)>;

struct GeneticOptions {
    int iterations = 400;
    int population = 32;
    double mutation_sigma_scale = 0.1;  // times the per-feature std of D1
    double crossover_prob = 0.5;        // per-column swap probability
    double cell_mutation_prob = 0.1;
    int early_stop_consecutive = 10;
};

AttackResult genetic_attack(const Model& f, const Dataset& ds, const GroupSplit& split,
                            const std::vector<int>& s0_prime,
                            const std::vector<int>& s1_init, int sensitive_index,
                            const GeneticOptions& opt, const DetectorFn& detector, Rng& rng,
                            int enum_cap = 15);

}  // namespace foolshap

#endif
