#include "foolshap/detection.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "foolshap/stats.hpp"

namespace foolshap {

namespace {

// survival function of the Kolmogorov distribution,
// Q(t) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 t^2), truncated at 100 terms
double kolmogorov_sf(double t) {
    if (t <= 0.0) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        double term = std::exp(-2.0 * k * k * t * t);
        s += (k % 2 == 1) ? term : -term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

std::vector<double> draw_reference(std::span<const double> pool, int m, Rng& rng,
                                   bool with_replacement) {
    std::vector<double> out(m);
    if (with_replacement || m > static_cast<int>(pool.size())) {
        for (int i = 0; i < m; ++i)
            out[i] = pool[rng.uniform_int(pool.size())];
    } else {
        std::vector<int> ids = rng.sample_without_replacement(static_cast<int>(pool.size()), m);
        for (int i = 0; i < m; ++i) out[i] = pool[ids[i]];
    }
    return out;
}

}  // namespace

TestReport ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());

    double stat = 0.0;
    std::size_t ia = 0, ib = 0;
    while (ia < sa.size() || ib < sb.size()) {
        double xa = ia < sa.size() ? sa[ia] : std::numeric_limits<double>::infinity();
        double xb = ib < sb.size() ? sb[ib] : std::numeric_limits<double>::infinity();
        double x = std::min(xa, xb);
        while (ia < sa.size() && sa[ia] == x) ++ia;
        while (ib < sb.size() && sb[ib] == x) ++ib;
        stat = std::max(stat, std::abs(ia / na - ib / nb));
    }

    TestReport rep;
    rep.statistic = stat;
    rep.test_name = "ks";
    rep.sample_sizes = {static_cast<int>(sa.size()), static_cast<int>(sb.size())};
    double eff = na * nb / (na + nb);
    rep.p_value = kolmogorov_sf(stat * std::sqrt(eff));
    return rep;
}

TestReport wald_test(std::span<const double> sample, double mu, double sigma2) {
    if (sample.empty()) throw std::invalid_argument("wald_test: empty sample");
    if (sigma2 <= 0.0) throw std::invalid_argument("wald_test: sigma2 must be > 0");
    const double m = static_cast<double>(sample.size());
    TestReport rep;
    rep.statistic = (mean(sample) - mu) / (std::sqrt(sigma2) / std::sqrt(m));
    rep.p_value = std::clamp(2.0 * (1.0 - normal_cdf(std::abs(rep.statistic))), 0.0, 1.0);
    rep.test_name = "wald";
    rep.sample_sizes = {static_cast<int>(sample.size()), 0};
    return rep;
}

bool detect_fraud(std::span<const double> f_d0, std::span<const double> f_d1,
                  std::span<const double> f_s0p, std::span<const double> f_s1p,
                  double alpha, int m, Rng& rng, bool with_replacement) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("detect_fraud: alpha must lie in (0,1)");
    if (m <= 0) throw std::invalid_argument("detect_fraud: M must be > 0");
    if (static_cast<int>(f_s0p.size()) != m || static_cast<int>(f_s1p.size()) != m)
        throw std::invalid_argument("detect_fraud: provided subsets must have size M");

    const double threshold = alpha / 4.0;
    for (int group = 0; group < 2; ++group) {
        std::span<const double> pool = group == 0 ? f_d0 : f_d1;
        std::span<const double> provided = group == 0 ? f_s0p : f_s1p;
        if (pool.empty()) throw std::invalid_argument("detect_fraud: empty group outputs");

        std::vector<double> reference = draw_reference(pool, m, rng, with_replacement);
        if (ks_two_sample(reference, provided).p_value < threshold) return true;

        double sigma2 = population_variance(pool);
        if (sigma2 > 0.0) {
            if (wald_test(provided, mean(pool), sigma2).p_value < threshold) return true;
        }
        // degenerate group: KS alone decides
    }
    return false;
}

CalibrationReport calibrate_detector(std::span<const double> f_d0,
                                     std::span<const double> f_d1, double alpha, int m,
                                     int reps, std::uint64_t seed, int threads) {
    if (reps < 1) throw std::invalid_argument("calibrate_detector: reps must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("calibrate_detector: alpha must lie in (0,1]");

    const double mu0 = mean(f_d0), mu1 = mean(f_d1);
    const double v0 = population_variance(f_d0), v1 = population_variance(f_d1);
    const double threshold = alpha / 4.0;
    Rng root(seed);

    auto run_rep = [&](int rep, std::array<int, 4>& counts) -> bool {
        Rng rng = root.child(static_cast<std::uint64_t>(rep));
        std::vector<double> s0p = draw_reference(f_d0, m, rng, true);
        std::vector<double> s1p = draw_reference(f_d1, m, rng, true);
        std::vector<double> ref0 = draw_reference(f_d0, m, rng, true);
        std::vector<double> ref1 = draw_reference(f_d1, m, rng, true);
        bool fired = false;
        if (ks_two_sample(ref0, s0p).p_value < threshold) { ++counts[0]; fired = true; }
        if (v0 > 0.0 && wald_test(s0p, mu0, v0).p_value < threshold) { ++counts[1]; fired = true; }
        if (ks_two_sample(ref1, s1p).p_value < threshold) { ++counts[2]; fired = true; }
        if (v1 > 0.0 && wald_test(s1p, mu1, v1).p_value < threshold) { ++counts[3]; fired = true; }
        return fired;
    };

    int fired_total = 0;
    std::array<int, 4> per_test{0, 0, 0, 0};
    int n_threads = std::max(1, threads);
    if (n_threads == 1) {
        for (int r = 0; r < reps; ++r)
            if (run_rep(r, per_test)) ++fired_total;
    } else {
        std::vector<int> fired(n_threads, 0);
        std::vector<std::array<int, 4>> counts(n_threads, {0, 0, 0, 0});
        std::vector<std::thread> pool;
        int chunk = (reps + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            int lo = t * chunk, hi = std::min(reps, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([&, t, lo, hi] {
                for (int r = lo; r < hi; ++r)
                    if (run_rep(r, counts[t])) ++fired[t];
            });
        }
        for (auto& th : pool) th.join();
        for (int t = 0; t < n_threads; ++t) {
            fired_total += fired[t];
            for (int k = 0; k < 4; ++k) per_test[k] += counts[t][k];
        }
    }

    CalibrationReport rep;
    rep.alpha = alpha;
    rep.m = m;
    rep.reps = reps;
    rep.fpr = static_cast<double>(fired_total) / static_cast<double>(reps);
    rep.per_test_rejections = per_test;
    return rep;
}

}  // namespace foolshap
