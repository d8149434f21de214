#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "foolshap/model.hpp"
#include "foolshap/rng.hpp"
#include "foolshap/shapley.hpp"
#include "foolshap/stats.hpp"

using namespace foolshap;

namespace {

ModelPtr make_fn(std::function<double(std::span<const double>)> fn) {
    return std::make_shared<FunctionModel>(std::move(fn));
}

// Independent oracle: brute-force average over all d! permutations of the
// marginal contributions, straight from the permutation definition.
std::vector<double> permutation_oracle(const Model& f, std::span<const double> x,
                                       std::span<const double> z) {
    const int d = static_cast<int>(x.size());
    std::vector<int> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<double> phi(d, 0.0);
    long count = 0;
    do {
        std::vector<double> v(z.begin(), z.end());
        double prev = f.predict(v);
        for (int i : perm) {
            v[i] = x[i];
            double cur = f.predict(v);
            phi[i] += cur - prev;
            prev = cur;
        }
        ++count;
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (double& p : phi) p /= static_cast<double>(count);
    return phi;
}

}  // namespace

TEST_CASE("replace substitutes exactly the active coordinates") {
    std::vector<double> z{0, 0}, x{1, 2};
    CHECK(replace(z, x, {}) == std::vector<double>{0, 0});
    CHECK(replace(z, x, {0, 1}) == std::vector<double>{1, 2});
    std::vector<double> z3{5, 6, 7}, x3{1, 2, 3};
    CHECK(replace(z3, x3, {1}) == std::vector<double>{5, 2, 7});
    CHECK_THROWS_AS(replace(z3, x, {0}), std::invalid_argument);
    CHECK_THROWS_AS(replace(z3, x3, {3}), std::out_of_range);
}

TEST_CASE("local shapley on hand-worked cases") {
    auto proj = make_fn([](std::span<const double> v) { return v[0]; });
    auto phi = local_shapley(*proj, std::vector<double>{1, 0}, std::vector<double>{0, 0}).phi;
    CHECK(phi[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(phi[1] == doctest::Approx(0.0).epsilon(1e-12));

    auto prod = make_fn([](std::span<const double> v) { return v[0] * v[1]; });
    phi = local_shapley(*prod, std::vector<double>{1, 1}, std::vector<double>{0, 0}).phi;
    CHECK(phi[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(phi[1] == doctest::Approx(0.5).epsilon(1e-12));

    // f(v) = 2 v0 + v0 v1: marginal gains (2,3) for feature 0, (1,0) for feature 1
    auto mix = make_fn([](std::span<const double> v) { return 2 * v[0] + v[0] * v[1]; });
    phi = local_shapley(*mix, std::vector<double>{1, 1}, std::vector<double>{0, 0}).phi;
    CHECK(phi[0] == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(phi[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("efficiency, dummy, linearity on random models") {
    Rng rng(7);
    for (int rep = 0; rep < 50; ++rep) {
        int d = 2 + static_cast<int>(rng.uniform_int(5));
        std::vector<double> w(d), x(d), z(d);
        for (int i = 0; i < d; ++i) {
            w[i] = rng.normal();
            x[i] = rng.normal();
            z[i] = rng.normal();
        }
        LogisticModel f(w, rng.normal());
        auto phi = local_shapley(f, x, z).phi;
        double total = std::accumulate(phi.begin(), phi.end(), 0.0);
        CHECK(total == doctest::Approx(f.predict(x) - f.predict(z)).epsilon(1e-9));
    }

    // dummy: a feature the model never reads gets exactly zero
    auto g = make_fn([](std::span<const double> v) { return std::sin(v[0]) + v[2]; });
    FunctionModel g2([](std::span<const double> v) { return std::sin(v[0]) + v[2]; });
    auto phi = local_shapley(g2, std::vector<double>{1, 5, 2}, std::vector<double>{0, -3, 0}).phi;
    CHECK(phi[1] == 0.0);

    // linearity of the attribution in the model
    Rng rng2(11);
    std::vector<double> x{0.3, -1.2, 0.7}, z{1.1, 0.4, -0.2};
    auto fa = make_fn([](std::span<const double> v) { return v[0] * v[1] + v[2]; });
    auto fb = make_fn([](std::span<const double> v) { return std::cos(v[2]) - v[0]; });
    auto fc = make_fn([](std::span<const double> v) {
        return 2.0 * (v[0] * v[1] + v[2]) - 3.0 * (std::cos(v[2]) - v[0]);
    });
    auto pa = local_shapley(*fa, x, z).phi;
    auto pb = local_shapley(*fb, x, z).phi;
    auto pc = local_shapley(*fc, x, z).phi;
    for (int i = 0; i < 3; ++i)
        CHECK(pc[i] == doctest::Approx(2.0 * pa[i] - 3.0 * pb[i]).epsilon(1e-9));
}

TEST_CASE("symmetry under column permutation") {
    auto f = make_fn([](std::span<const double> v) { return v[0] * v[0] + 2 * v[1] - v[2] * v[1]; });
    auto fp = make_fn([](std::span<const double> v) { return v[2] * v[2] + 2 * v[0] - v[1] * v[0]; });
    // fp reads permuted inputs: (0,1,2) -> (2,0,1)
    std::vector<double> x{0.5, -0.3, 1.2}, z{-1.0, 0.8, 0.1};
    std::vector<double> xp{x[1], x[2], x[0]}, zp{z[1], z[2], z[0]};
    auto phi = local_shapley(*f, x, z).phi;
    auto phip = local_shapley(*fp, xp, zp).phi;
    CHECK(phip[2] == doctest::Approx(phi[0]).epsilon(1e-12));
    CHECK(phip[0] == doctest::Approx(phi[1]).epsilon(1e-12));
    CHECK(phip[1] == doctest::Approx(phi[2]).epsilon(1e-12));
}

TEST_CASE("subset enumeration matches the permutation oracle for d <= 5") {
    Rng rng(42);
    for (int rep = 0; rep < 20; ++rep) {
        int d = 2 + static_cast<int>(rng.uniform_int(4));
        std::vector<double> w(d), x(d), z(d);
        for (int i = 0; i < d; ++i) {
            w[i] = rng.normal();
            x[i] = rng.normal();
            z[i] = rng.normal();
        }
        double bias = rng.normal();
        auto f = make_fn([w, bias](std::span<const double> v) {
            double acc = bias;
            for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * v[i] + 0.3 * v[i] * v[(i + 1) % w.size()];
            return 1.0 / (1.0 + std::exp(-acc));
        });
        auto fast = local_shapley(*f, x, z).phi;
        auto oracle = permutation_oracle(*f, x, z);
        for (int i = 0; i < d; ++i)
            CHECK(fast[i] == doctest::Approx(oracle[i]).epsilon(1e-12));
    }
}

TEST_CASE("enumeration cap raises a capacity error") {
    std::vector<double> x(20, 1.0), z(20, 0.0);
    auto f = make_fn([](std::span<const double> v) {
        double s = 0;
        for (double u : v) s += u;
        return s;
    });
    try {
        (void)local_shapley(*f, x, z);
        FAIL("expected a capacity error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("enumeration cap") != std::string::npos);
    }
    // but a model that only reads a few of the 20 columns stays exact
    LogisticModel sparse({1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                          0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -2.0},
                         0.0);
    auto phi = local_shapley(sparse, x, z).phi;
    double total = std::accumulate(phi.begin(), phi.end(), 0.0);
    CHECK(total == doctest::Approx(sparse.predict(x) - sparse.predict(z)).epsilon(1e-12));
    CHECK(phi[5] == 0.0);
}

TEST_CASE("global shapley plug-in estimate") {
    auto cst = make_fn([](std::span<const double>) { return 0.4; });
    std::vector<std::vector<double>> s0{{1, 0}, {1, 1}}, s1{{0, 0}, {0, 1}};
    auto phi = global_shapley_mc(*cst, s0, s1).phi;
    CHECK(phi[0] == 0.0);
    CHECK(phi[1] == 0.0);

    auto proj = make_fn([](std::span<const double> v) { return v[0]; });
    phi = global_shapley_mc(*proj, s0, s1).phi;
    CHECK(phi[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(phi[1] == doctest::Approx(0.0).epsilon(1e-12));

    // singleton sets reduce to the LSV
    std::vector<std::vector<double>> a{{0.7, -0.2}}, b{{-0.5, 1.3}};
    auto nl = make_fn([](std::span<const double> v) { return std::tanh(v[0] - v[1] * v[0]); });
    auto g = global_shapley_mc(*nl, a, b).phi;
    auto l = local_shapley(*nl, a[0], b[0]).phi;
    CHECK(g[0] == doctest::Approx(l[0]).epsilon(1e-12));
    CHECK(g[1] == doctest::Approx(l[1]).epsilon(1e-12));

    CHECK_THROWS_AS((void)global_shapley_mc(*proj, {}, s1), std::invalid_argument);
}

TEST_CASE("plug-in GSV components sum to the difference of mean outputs") {
    Rng rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        int d = 3;
        std::vector<std::vector<double>> s0, s1;
        for (int i = 0; i < 4; ++i) {
            std::vector<double> r(d);
            for (double& v : r) v = rng.normal();
            s0.push_back(r);
        }
        for (int i = 0; i < 5; ++i) {
            std::vector<double> r(d);
            for (double& v : r) v = rng.normal();
            s1.push_back(r);
        }
        std::vector<double> w{0.5, -1.0, 2.0};
        LogisticModel f(w, 0.1);
        auto phi = global_shapley_mc(f, s0, s1).phi;
        double total = std::accumulate(phi.begin(), phi.end(), 0.0);
        double m0 = 0, m1 = 0;
        for (auto& r : s0) m0 += f.predict(r);
        for (auto& r : s1) m1 += f.predict(r);
        CHECK(total == doctest::Approx(m0 / 4 - m1 / 5).epsilon(1e-9));
    }
}

TEST_CASE("per background coefficients") {
    auto proj_s = make_fn([](std::span<const double> v) { return v[1]; });
    std::vector<std::vector<double>> s0p{{0.3, 0.0}, {0.9, 0.0}};
    std::vector<std::vector<double>> d1{{0.1, 1.0}, {0.2, 1.0}, {0.7, 1.0}};
    auto bc = per_background_coeffs(*proj_s, s0p, d1, 1);
    REQUIRE(bc.coeffs.size() == 3);
    for (double c : bc.coeffs) CHECK(c == doctest::Approx(-1.0).epsilon(1e-12));

    // mean of the coefficients equals the uniform-background GSV component
    auto nl = make_fn([](std::span<const double> v) { return std::tanh(v[0] + 0.5 * v[1]); });
    auto bc2 = per_background_coeffs(*nl, s0p, d1, 1);
    auto gsv = global_shapley_mc(*nl, s0p, d1).phi;
    CHECK(mean(bc2.coeffs) == doctest::Approx(gsv[1]).epsilon(1e-9));
    // full matrix row consistency
    for (int k = 0; k < 2; ++k)
        CHECK(mean(bc2.per_feature[k]) == doctest::Approx(gsv[k]).epsilon(1e-9));

    // singleton foreground reduces to the LSV
    std::vector<std::vector<double>> single{{0.3, 0.0}};
    auto bc3 = per_background_coeffs(*nl, single, d1, 1);
    for (int j = 0; j < 3; ++j)
        CHECK(bc3.coeffs[j] ==
              doctest::Approx(local_shapley(*nl, single[0], d1[j]).phi[1]).epsilon(1e-12));

    CHECK_THROWS_AS((void)per_background_coeffs(*nl, s0p, d1, 5), std::out_of_range);
}

TEST_CASE("threaded coefficient computation merges deterministically") {
    Rng rng(9);
    std::vector<std::vector<double>> s0p, d1;
    for (int i = 0; i < 6; ++i) {
        std::vector<double> r(4);
        for (double& v : r) v = rng.normal();
        s0p.push_back(r);
    }
    for (int j = 0; j < 17; ++j) {
        std::vector<double> r(4);
        for (double& v : r) v = rng.normal();
        d1.push_back(r);
    }
    LogisticModel f({0.4, -0.8, 1.1, 0.2}, -0.3);
    auto seq = per_background_coeffs(f, s0p, d1, 2, 15, 1);
    auto par = per_background_coeffs(f, s0p, d1, 2, 15, 4);
    for (int j = 0; j < 17; ++j) CHECK(seq.coeffs[j] == par.coeffs[j]);
}

TEST_CASE("weighted gsv") {
    std::vector<double> c{-2, -1, 3};
    std::vector<double> uniform{1.0 / 3, 1.0 / 3, 1.0 / 3};
    CHECK(weighted_gsv(c, uniform) == doctest::Approx(0.0).epsilon(1e-12));
    std::vector<double> point{0, 0, 1};
    CHECK(weighted_gsv(c, point) == doctest::Approx(3.0));
    std::vector<double> w{0.5, 0.25, 0.25};
    CHECK(weighted_gsv(c, w) == doctest::Approx(-0.5).epsilon(1e-12));
    std::vector<double> bad{0.5, 0.25, 0.5};
    CHECK_THROWS_AS((void)weighted_gsv(c, bad), std::runtime_error);
}

TEST_CASE("confidence interval basics") {
    auto cst = std::make_shared<FunctionModel>([](std::span<const double>) { return 0.3; });
    Rng rng(1);
    std::vector<std::vector<double>> s0, s1;
    for (int i = 0; i < 5; ++i) {
        s0.push_back({rng.normal(), rng.normal()});
        s1.push_back({rng.normal(), rng.normal()});
    }
    auto ci = gsv_confidence_interval(*cst, s0, s1, 0, 0.05);
    CHECK(ci.center == 0.0);
    CHECK(ci.half_width == 0.0);

    LogisticModel f({1.0, -0.5}, 0.0);
    auto ci2 = gsv_confidence_interval(f, s0, s1, 0, 0.9999999);
    CHECK(ci2.half_width == doctest::Approx(0.0).epsilon(1e-4));

    CHECK_THROWS_AS((void)gsv_confidence_interval(f, {{0.0, 0.0}}, {{1.0, 1.0}}, 0, 0.05),
                    std::invalid_argument);
}

TEST_CASE("confidence interval covers the population GSV") {
    // population = a large finite set; resamples drawn with replacement
    Rng rng(123);
    const int pop_n = 400, m = 24, d = 2;
    std::vector<std::vector<double>> pop0, pop1;
    for (int i = 0; i < pop_n; ++i) {
        pop0.push_back({rng.normal(0.5, 1.0), rng.normal()});
        pop1.push_back({rng.normal(-0.5, 1.0), rng.normal()});
    }
    LogisticModel f({0.9, -0.4}, 0.1);
    double truth = global_shapley_mc(f, pop0, pop1).phi[0];

    int covered = 0;
    const int reps = 500;
    for (int r = 0; r < reps; ++r) {
        Rng rr = rng.child(r);
        std::vector<std::vector<double>> s0, s1;
        for (int i = 0; i < m; ++i) {
            s0.push_back(pop0[rr.uniform_int(pop_n)]);
            s1.push_back(pop1[rr.uniform_int(pop_n)]);
        }
        auto ci = gsv_confidence_interval(f, s0, s1, 0, 0.05);
        if (std::abs(ci.center - truth) <= ci.half_width) ++covered;
    }
    CHECK(covered >= static_cast<int>(0.90 * reps));
}

TEST_CASE("coefficient cache round-trips") {
    auto f = std::make_shared<LogisticModel>(std::vector<double>{0.2, -0.7}, 0.0);
    std::vector<std::vector<double>> s0p{{1.0, 0.0}}, d1{{0.0, 1.0}, {0.5, 1.0}};
    auto bc = per_background_coeffs(*f, s0p, d1, 1);
    bc.foreground_ids = {3};
    std::vector<int> bg_ids{10, 11};
    auto dir = std::filesystem::temp_directory_path() / "foolshap_cache_test";
    std::filesystem::remove_all(dir);
    save_coeff_cache(dir, "k1", bc, {"a", "b"}, 77, bg_ids);
    auto loaded = load_coeff_cache(dir, "k1", 77, {3}, bg_ids);
    REQUIRE(loaded.has_value());
    CHECK(loaded->coeffs == bc.coeffs);
    CHECK(loaded->per_feature == bc.per_feature);
    CHECK_FALSE(load_coeff_cache(dir, "k1", 78, {3}, bg_ids).has_value());
    CHECK_FALSE(load_coeff_cache(dir, "k1", 77, {4}, bg_ids).has_value());
    std::filesystem::remove_all(dir);
}
