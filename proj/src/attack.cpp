#include "foolshap/attack.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "foolshap/detection.hpp"
#include "foolshap/stats.hpp"

namespace foolshap {

namespace {

// mean pairwise |f_i - f_j| over all ordered pairs, via the sorted-prefix identity
double mean_pairwise_gap(std::vector<double> outputs) {
    const int n = static_cast<int>(outputs.size());
    if (n < 2) return 0.0;
    std::sort(outputs.begin(), outputs.end());
    double acc = 0.0;
    for (int j = 0; j < n; ++j)
        acc += outputs[j] * (2.0 * j - n + 1.0);
    // sum over unordered pairs, doubled, over n^2 ordered pairs
    return 2.0 * acc / (static_cast<double>(n) * n);
}

std::vector<int> draw_ids_weighted(const std::vector<int>& pool,
                                   const std::vector<double>& omega, int m, Rng& rng) {
    CategoricalSampler sampler(omega);
    std::vector<int> ids(m);
    for (int i = 0; i < m; ++i) ids[i] = pool[sampler.draw(rng)];
    return ids;
}

}  // namespace

double detection_rate(std::span<const double> omega, const Model& f, const Dataset& ds,
                      const GroupSplit& split, const std::vector<int>& s0_prime, int m,
                      double alpha, int reps, Rng& rng) {
    if (reps < 1) throw std::invalid_argument("detection_rate: reps must be >= 1");
    std::vector<double> f_d0 = model_outputs(f, ds, split.d0);
    std::vector<double> f_d1 = model_outputs(f, ds, split.d1);
    std::vector<double> f_s0p = model_outputs(f, ds, s0_prime);
    std::vector<double> omega_v(omega.begin(), omega.end());
    CategoricalSampler sampler(omega_v);

    int fired = 0;
    std::vector<double> f_s1p(m);
    for (int r = 0; r < reps; ++r) {
        for (int i = 0; i < m; ++i) f_s1p[i] = f_d1[sampler.draw(rng)];
        if (detect_fraud(f_d0, f_d1, f_s0p, f_s1p, alpha, m, rng)) ++fired;
    }
    return static_cast<double>(fired) / static_cast<double>(reps);
}

AttackResult fool_shap(const Model& f, const Dataset& ds, const GroupSplit& split,
                       const AttackConfig& cfg) {
    if (split.d0.empty() || split.d1.empty())
        throw std::invalid_argument("fool_shap: both groups must be non-empty");
    const int n0 = static_cast<int>(split.d0.size());
    const int n1 = static_cast<int>(split.d1.size());
    const int s = ds.sensitive_index;

    Rng rng(cfg.seed);

    // line 2: honest foreground sample
    std::vector<int> s0_prime;
    if (cfg.m <= n0) {
        std::vector<int> picks = rng.sample_without_replacement(n0, cfg.m);
        for (int p : picks) s0_prime.push_back(split.d0[p]);
    } else {
        for (int i = 0; i < cfg.m; ++i)
            s0_prime.push_back(split.d0[rng.uniform_int(n0)]);
    }

    // line 3: per-background coefficients (all features)
    BackgroundCoefficients bc = per_background_coeffs(
        f, gather_rows(ds, s0_prime), gather_rows(ds, split.d1), s, cfg.enum_cap, cfg.threads);

    std::vector<double> d1_outputs = model_outputs(f, ds, split.d1);
    const int d = ds.d();

    // lines 4-5: uniform-background initialization
    AttackResult res;
    res.s0_prime = s0_prime;
    res.phi_before = mean(bc.coeffs);
    res.gsv_before.feature_names = ds.feature_names;
    res.gsv_before.phi.resize(d);
    for (int k = 0; k < d; ++k) res.gsv_before.phi[k] = mean(bc.per_feature[k]);

    // lambda grid, geometric, descending
    double lambda_min = cfg.lambda_min, lambda_max = cfg.lambda_max;
    if (lambda_min < 0.0 || lambda_max < 0.0) {
        double gap = mean_pairwise_gap(d1_outputs);
        double scale = std::abs(res.phi_before) / std::max(gap, 1e-12);
        if (scale <= 0.0) scale = 1.0;
        if (lambda_min < 0.0) lambda_min = 1e-3 * scale;
        if (lambda_max < 0.0) lambda_max = 1e3 * scale;
    }
    if (lambda_min > lambda_max)
        throw std::invalid_argument("fool_shap: lambda_min exceeds lambda_max");
    std::vector<double> grid(cfg.grid_size);
    if (cfg.grid_size == 1) {
        grid[0] = lambda_max;
    } else {
        double ratio = std::pow(lambda_min / lambda_max, 1.0 / (cfg.grid_size - 1));
        double cur = lambda_max;
        for (int g = 0; g < cfg.grid_size; ++g) {
            grid[g] = cur;
            cur *= ratio;
        }
    }

    // lines 6-11: independent per-lambda solves and detection estimates
    std::vector<LambdaTrace> trace(grid.size());
    std::vector<BackgroundWeights> solutions(grid.size());
    auto eval_lambda = [&](int g) {
        Rng task_rng = rng.child(1000 + static_cast<std::uint64_t>(g));
        BackgroundWeights bw = compute_weights_bootstrap(
            d1_outputs, bc.coeffs, grid[g], cfg.bootstrap_replicates, cfg.max_solve_n1, task_rng);
        LambdaTrace& t = trace[g];
        t.lambda = grid[g];
        t.weighted_gsv_s = 0.0;
        t.weighted_gsv_all.resize(d);
        for (int k = 0; k < d; ++k) {
            double acc = 0.0;
            for (int j = 0; j < n1; ++j) acc += bw.omega[j] * bc.per_feature[k][j];
            t.weighted_gsv_all[k] = acc;
        }
        t.weighted_gsv_s = t.weighted_gsv_all[s];
        t.wasserstein_cost = bw.wasserstein_cost;
        t.detection_rate = detection_rate(bw.omega, f, ds, split, s0_prime, cfg.m, cfg.alpha,
                                          cfg.detection_reps, task_rng);
        solutions[g] = std::move(bw);
    };
    if (cfg.threads <= 1) {
        for (std::size_t g = 0; g < grid.size(); ++g) eval_lambda(static_cast<int>(g));
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int t = 0; t < cfg.threads; ++t)
            pool.emplace_back([&] {
                for (int g = next.fetch_add(1); g < static_cast<int>(grid.size());
                     g = next.fetch_add(1))
                    eval_lambda(g);
            });
        for (auto& th : pool) th.join();
    }

    // line 12: sequential accept, lambda descending (largest first)
    int chosen = -1;
    double best_abs = std::abs(res.phi_before);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (std::abs(trace[g].weighted_gsv_s) < best_abs &&
            trace[g].detection_rate < cfg.tau) {
            best_abs = std::abs(trace[g].weighted_gsv_s);
            chosen = static_cast<int>(g);
            trace[g].accepted = true;
        }
    }

    res.trace = trace;
    if (chosen < 0) {
        res.fell_back_to_uniform = true;
        res.chosen_lambda = 0.0;
        res.weights.omega.assign(n1, 1.0 / static_cast<double>(n1));
        res.weights.lambda = 0.0;
        res.weights.averaged = false;
        res.phi_after = res.phi_before;
        res.gsv_after = res.gsv_before;
        res.acceptance_detection_rate = 0.0;
        res.amplitude_reduction = 0.0;
    } else {
        res.chosen_lambda = grid[chosen];
        res.weights = solutions[chosen];
        res.phi_after = trace[chosen].weighted_gsv_s;
        res.gsv_after.feature_names = ds.feature_names;
        res.gsv_after.phi = trace[chosen].weighted_gsv_all;
        res.acceptance_detection_rate = trace[chosen].detection_rate;
        res.amplitude_reduction =
            res.phi_before != 0.0 ? 1.0 - std::abs(res.phi_after) / std::abs(res.phi_before)
                                  : 0.0;
    }

    // line 17: final subset from the best background + re-measured detection
    Rng final_rng = rng.child(999999);
    res.s1_prime = draw_ids_weighted(split.d1, res.weights.omega, cfg.m, final_rng);
    res.detection_rate = detection_rate(res.weights.omega, f, ds, split, s0_prime, cfg.m,
                                        cfg.alpha, cfg.detection_reps, final_rng);
    return res;
}

AttackResult brute_force_attack(const Model& f, const Dataset& ds, const GroupSplit& split,
                                const std::vector<int>& s0_prime, int m,
                                std::chrono::duration<double> time_budget, Rng& rng,
                                std::optional<long> max_draws, int enum_cap) {
    if (time_budget.count() <= 0.0 && !max_draws)
        throw std::invalid_argument("brute_force_attack: budget must be positive");
    const int n1 = static_cast<int>(split.d1.size());
    const int s = ds.sensitive_index;
    std::vector<std::vector<double>> fg = gather_rows(ds, s0_prime);

    AttackResult res;
    res.method = "brute-force";
    res.s0_prime = s0_prime;

    auto start = std::chrono::steady_clock::now();
    long draws = 0;
    double best_abs = std::numeric_limits<double>::infinity();
    for (;;) {
        std::vector<int> ids(m);
        for (int i = 0; i < m; ++i) ids[i] = split.d1[rng.uniform_int(n1)];
        // honest recomputation of the plug-in GSV from LSV, no caching
        std::vector<std::vector<double>> bg = gather_rows(ds, ids);
        double phi = global_shapley_mc(f, fg, bg, enum_cap).phi[s];
        if (std::abs(phi) < best_abs) {
            best_abs = std::abs(phi);
            res.phi_after = phi;
            res.s1_prime = ids;
        }
        ++draws;
        if (max_draws && draws >= *max_draws) break;
        if (!max_draws && std::chrono::steady_clock::now() - start >= time_budget) break;
    }
    res.draws = draws;

    BackgroundCoefficients bc = per_background_coeffs(f, fg, gather_rows(ds, split.d1), s, enum_cap);
    res.phi_before = mean(bc.coeffs);
    res.amplitude_reduction =
        res.phi_before != 0.0 ? 1.0 - std::abs(res.phi_after) / std::abs(res.phi_before) : 0.0;
    return res;
}

AttackResult genetic_attack(const Model& f, const Dataset& ds, const GroupSplit& split,
                            const std::vector<int>& s0_prime,
                            const std::vector<int>& s1_init, int sensitive_index,
                            const GeneticOptions& opt, const DetectorFn& detector, Rng& rng,
                            int enum_cap) {
    if (opt.population < 2) throw std::invalid_argument("genetic_attack: population must be >= 2");
    if (opt.iterations < 0) throw std::invalid_argument("genetic_attack: iterations must be >= 0");
    const int d = ds.d();
    std::vector<std::vector<double>> fg = gather_rows(ds, s0_prime);

    // per-feature std over the background group, sets the mutation scale
    std::vector<double> feat_sigma(d, 0.0);
    {
        std::vector<double> col(split.d1.size());
        for (int k = 0; k < d; ++k) {
            for (std::size_t j = 0; j < split.d1.size(); ++j) col[j] = ds.rows[split.d1[j]][k];
            feat_sigma[k] = std::sqrt(population_variance(col));
        }
    }

    using Individual = std::vector<std::vector<double>>;
    Individual init = gather_rows(ds, s1_init);
    auto fitness = [&](const Individual& ind) {
        return std::abs(global_shapley_mc(f, fg, ind, enum_cap).phi[sensitive_index]);
    };

    AttackResult res;
    res.method = "genetic";
    res.s0_prime = s0_prime;
    res.s1_prime = s1_init;
    {
        BackgroundCoefficients bc =
            per_background_coeffs(f, fg, gather_rows(ds, split.d1), sensitive_index, enum_cap);
        res.phi_before = mean(bc.coeffs);
    }

    std::vector<Individual> population(opt.population, init);
    std::vector<double> fit(opt.population, fitness(init));

    Individual best = init;
    double best_fit = fit[0];
    Individual best_undetected;
    double best_undetected_fit = std::numeric_limits<double>::infinity();
    bool have_undetected = false;
    int consecutive_detections = 0;

    for (int iter = 0; iter < opt.iterations; ++iter) {
        // crossover: random parent pairs swap columns, producing two children each
        std::vector<Individual> children;
        std::vector<int> order(opt.population);
        std::iota(order.begin(), order.end(), 0);
        for (int i = opt.population - 1; i > 0; --i)
            std::swap(order[i], order[rng.uniform_int(i + 1)]);
        for (int p = 0; p + 1 < opt.population; p += 2) {
            Individual a = population[order[p]];
            Individual b = population[order[p + 1]];
            for (int k = 0; k < d; ++k) {
                if (rng.bernoulli(opt.crossover_prob)) {
                    for (std::size_t r = 0; r < a.size(); ++r) std::swap(a[r][k], b[r][k]);
                }
            }
            children.push_back(std::move(a));
            children.push_back(std::move(b));
        }
        // mutation: Gaussian noise on a random subset of cells
        for (Individual& child : children) {
            for (auto& row : child)
                for (int k = 0; k < d; ++k)
                    if (rng.bernoulli(opt.cell_mutation_prob))
                        row[k] += rng.normal(0.0, opt.mutation_sigma_scale * feat_sigma[k]);
        }

        // elitist truncation selection on |GSV_s|
        std::vector<Individual> all = population;
        std::vector<double> all_fit = fit;
        for (Individual& child : children) {
            all_fit.push_back(fitness(child));
            all.push_back(std::move(child));
        }
        std::vector<int> idx(all.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](int a, int b) { return all_fit[a] < all_fit[b]; });
        for (int k = 0; k < opt.population; ++k) {
            population[k] = all[idx[k]];
            fit[k] = all_fit[idx[k]];
        }

        if (fit[0] < best_fit) {
            best_fit = fit[0];
            best = population[0];
        }
        bool flagged = detector(population[0]);
        if (flagged) {
            ++consecutive_detections;
        } else {
            consecutive_detections = 0;
            if (fit[0] < best_undetected_fit) {
                best_undetected_fit = fit[0];
                best_undetected = population[0];
                have_undetected = true;
            }
        }
        if (consecutive_detections >= opt.early_stop_consecutive) {
            res.genetic_early_stop = true;
            break;
        }
    }

    const Individual& winner =
        opt.iterations == 0 ? init : (have_undetected ? best_undetected : best);
    res.fake_rows = winner;
    res.detection_rate = (have_undetected || opt.iterations == 0) ? 0.0 : 1.0;
    res.phi_after = global_shapley_mc(f, fg, winner, enum_cap).phi[sensitive_index];
    res.amplitude_reduction =
        res.phi_before != 0.0 ? 1.0 - std::abs(res.phi_after) / std::abs(res.phi_before) : 0.0;
    return res;
}

}  // namespace foolshap
