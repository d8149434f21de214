#include "doctest.h"

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "foolshap/rng.hpp"
#include "foolshap/transport.hpp"

using namespace foolshap;

namespace {

// Independent oracle: enumerate every integral weight vector omega_tilde
// summing to N1, score beta.c'omega + lambda * W1 with the quantile-based
// 1-D transport cost, and keep the minimum.
struct OracleResult {
    double objective = std::numeric_limits<double>::infinity();
    std::vector<double> omega;
};

void enumerate_compositions(std::vector<int>& cur, int pos, int remaining,
                            const std::function<void(const std::vector<int>&)>& visit) {
    if (pos == static_cast<int>(cur.size()) - 1) {
        cur[pos] = remaining;
        visit(cur);
        return;
    }
    for (int v = 0; v <= remaining; ++v) {
        cur[pos] = v;
        enumerate_compositions(cur, pos + 1, remaining - v, visit);
    }
}

OracleResult composition_oracle(const std::vector<double>& outputs,
                                const std::vector<double>& signed_costs, double lambda) {
    const int n1 = static_cast<int>(outputs.size());
    std::vector<double> uniform(n1, 1.0 / n1);
    OracleResult best;
    std::vector<int> cur(n1, 0);
    enumerate_compositions(cur, 0, n1, [&](const std::vector<int>& w) {
        std::vector<double> omega(n1);
        double linear = 0.0;
        for (int j = 0; j < n1; ++j) {
            omega[j] = static_cast<double>(w[j]) / n1;
            linear += omega[j] * signed_costs[j];
        }
        double wc = wasserstein_1d(outputs, uniform, outputs, omega);
        double obj = linear + lambda * wc;
        if (obj < best.objective - 1e-15) {
            best.objective = obj;
            best.omega = omega;
        }
    });
    return best;
}

std::vector<double> signed_costs(const std::vector<double>& coeffs) {
    double total = std::accumulate(coeffs.begin(), coeffs.end(), 0.0);
    double beta = total < 0.0 ? -1.0 : 1.0;
    std::vector<double> out(coeffs.size());
    for (std::size_t j = 0; j < coeffs.size(); ++j) out[j] = beta * coeffs[j];
    return out;
}

}  // namespace

TEST_CASE("1-D wasserstein basics") {
    std::vector<double> a{0.1, 0.4, 0.9}, wa{1, 1, 1};
    CHECK(wasserstein_1d(a, wa, a, wa) == doctest::Approx(0.0));

    std::vector<double> p{0.2}, q{0.7}, one{1.0};
    CHECK(wasserstein_1d(p, one, q, one) == doctest::Approx(0.5).epsilon(1e-12));

    // {0: 1/2, 1: 1/2} vs {0: 1/4, 1: 3/4}: move a quarter of mass by 1
    std::vector<double> vals{0.0, 1.0};
    std::vector<double> w1{0.5, 0.5}, w2{0.25, 0.75};
    CHECK(wasserstein_1d(vals, w1, vals, w2) == doctest::Approx(0.25).epsilon(1e-12));

    CHECK(wasserstein_1d(p, one, q, one) ==
          doctest::Approx(wasserstein_1d(q, one, p, one)).epsilon(1e-12));
    std::vector<double> neg{-1.0};
    CHECK_THROWS_AS((void)wasserstein_1d(p, neg, q, one), std::invalid_argument);
}

TEST_CASE("generic mcf solver on a tiny transportation instance") {
    // two sources (supply 1 each) to two sinks (demand 1 each)
    McfGraph g(6);
    int s = 0, t = 5;
    g.add_edge(s, 1, 1, 0.0);
    g.add_edge(s, 2, 1, 0.0);
    int e13 = g.add_edge(1, 3, 2, 1.0);
    int e14 = g.add_edge(1, 4, 2, 5.0);
    int e23 = g.add_edge(2, 3, 2, 2.0);
    int e24 = g.add_edge(2, 4, 2, 1.0);
    g.add_edge(3, t, 1, 0.0);
    g.add_edge(4, t, 1, 0.0);
    double cost = g.solve(s, t, 2);
    CHECK(cost == doctest::Approx(2.0));
    CHECK(g.flow_on(e13) == 1);
    CHECK(g.flow_on(e24) == 1);
    CHECK(g.flow_on(e14) == 0);
    CHECK(g.flow_on(e23) == 0);
}

TEST_CASE("mcf handles negative edge costs") {
    McfGraph g(4);
    g.add_edge(0, 1, 2, -3.0);
    g.add_edge(0, 2, 2, 1.0);
    g.add_edge(1, 3, 1, 0.0);
    g.add_edge(2, 3, 1, 0.0);
    // both units must reach the sink; one path is forced through cost 1
    CHECK(g.solve(0, 3, 2) == doctest::Approx(-2.0));
    CHECK_THROWS_AS((void)g.solve(0, 3, 5), std::runtime_error);
}

TEST_CASE("flow-network solve agrees with the generic SSP solver") {
    Rng rng(5);
    for (int rep = 0; rep < 30; ++rep) {
        int n1 = 2 + static_cast<int>(rng.uniform_int(4));
        FlowNetwork net;
        net.lambda = rng.uniform() * 2.0;
        for (int j = 0; j < n1; ++j) {
            net.source_costs.push_back(rng.normal());
            net.outputs.push_back(rng.uniform());
        }
        BackgroundWeights fast = solve_flow_network(net);

        // same network through the SSP machinery
        // nodes: 0 source, 1..n1 left, n1+1..2n1 right, 2n1+1 sink
        McfGraph g(2 * n1 + 2);
        int src = 0, snk = 2 * n1 + 1;
        for (int j = 0; j < n1; ++j) g.add_edge(src, 1 + j, n1, net.source_costs[j]);
        for (int j = 0; j < n1; ++j)
            for (int i = 0; i < n1; ++i)
                g.add_edge(1 + j, n1 + 1 + i, n1,
                           net.lambda * std::abs(net.outputs[i] - net.outputs[j]));
        for (int i = 0; i < n1; ++i) g.add_edge(n1 + 1 + i, snk, 1, 0.0);
        double ssp_cost = g.solve(src, snk, n1);
        CHECK(fast.objective == doctest::Approx(ssp_cost / n1).epsilon(1e-9));
    }
}

TEST_CASE("n1 = 1 network is the single forced path") {
    std::vector<double> out{0.42}, c{-3.0};
    BackgroundWeights bw = compute_weights(out, c, 0.7);
    CHECK(bw.omega == std::vector<double>{1.0});
    CHECK(bw.wasserstein_cost == doctest::Approx(0.0));
    CHECK(bw.weighted_sum == doctest::Approx(3.0));  // beta = -1
}

TEST_CASE("lambda = 0 puts all mass on the best vertex") {
    std::vector<double> out{0.3, 0.6, 0.1};
    std::vector<double> c{-5.0, -1.0, -2.0};
    // beta = -1, so costs are (5, 1, 2): mass lands on index 1
    BackgroundWeights bw = compute_weights(out, c, 0.0);
    CHECK(bw.omega[0] == doctest::Approx(0.0));
    CHECK(bw.omega[1] == doctest::Approx(1.0));
    CHECK(bw.omega[2] == doctest::Approx(0.0));
}

TEST_CASE("huge lambda recovers the uniform background") {
    std::vector<double> out{0.11, 0.37, 0.58, 0.83};
    std::vector<double> c{2.0, -1.0, 0.5, 3.0};
    BackgroundWeights bw = compute_weights(out, c, 1e12);
    for (double w : bw.omega) CHECK(w == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(bw.wasserstein_cost == doctest::Approx(0.0));
}

TEST_CASE("compute_weights matches the composition-enumeration oracle") {
    Rng rng(17);
    for (int rep = 0; rep < 40; ++rep) {
        int n1 = 2 + static_cast<int>(rng.uniform_int(4));
        std::vector<double> out(n1), c(n1);
        for (int j = 0; j < n1; ++j) {
            out[j] = rng.uniform();
            c[j] = rng.normal();
        }
        double lambda = rep % 4 == 0 ? 0.0 : rng.uniform() * 2.0;
        BackgroundWeights bw = compute_weights(out, c, lambda);
        OracleResult oracle = composition_oracle(out, signed_costs(c), lambda);
        CHECK(bw.objective == doctest::Approx(oracle.objective).epsilon(1e-9));

        // simplex + integrality of the returned weights
        double total = 0.0;
        for (double w : bw.omega) {
            total += w;
            double scaled = w * n1;
            CHECK(std::abs(scaled - std::round(scaled)) < 1e-9);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

        // coupling marginals: rows sum to 1/N1, columns to omega_j
        std::vector<double> col(n1, 0.0), row(n1, 0.0);
        for (auto [i, j, pi] : bw.coupling) {
            col[j] += pi;
            row[i] += pi;
        }
        for (int j = 0; j < n1; ++j) CHECK(col[j] == doctest::Approx(bw.omega[j]).epsilon(1e-12));
        for (int i = 0; i < n1; ++i) CHECK(row[i] == doctest::Approx(1.0 / n1).epsilon(1e-12));

        // coupling cost achieves the 1-D transport optimum for its marginals
        std::vector<double> uniform(n1, 1.0 / n1);
        CHECK(bw.wasserstein_cost ==
              doctest::Approx(wasserstein_1d(out, uniform, out, bw.omega)).epsilon(1e-9));
    }
}

TEST_CASE("scalarization monotonicity in lambda") {
    Rng rng(23);
    for (int rep = 0; rep < 10; ++rep) {
        int n1 = 6;
        std::vector<double> out(n1), c(n1);
        for (int j = 0; j < n1; ++j) {
            out[j] = rng.uniform();
            c[j] = rng.normal();
        }
        double prev_w = std::numeric_limits<double>::infinity();
        double prev_lin = -std::numeric_limits<double>::infinity();
        for (double lambda : {0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0}) {
            BackgroundWeights bw = compute_weights(out, c, lambda);
            CHECK(bw.wasserstein_cost <= prev_w + 1e-12);
            CHECK(bw.weighted_sum >= prev_lin - 1e-12);
            prev_w = bw.wasserstein_cost;
            prev_lin = bw.weighted_sum;

            // never worse than the uniform weights
            double uniform_lin = 0.0;
            std::vector<double> sc = signed_costs(c);
            for (int j = 0; j < n1; ++j) uniform_lin += sc[j] / n1;
            CHECK(bw.objective <= uniform_lin + 1e-12);
        }
    }
}

TEST_CASE("multi-sensitive aggregation") {
    std::vector<double> out{0.2, 0.5, 0.9};
    std::vector<double> c{1.0, -0.5, 2.0};

    // single-feature set reduces exactly to compute_weights
    BackgroundWeights multi = compute_weights_multi({c}, out, 0.3);
    BackgroundWeights single = compute_weights(out, c, 0.3);
    CHECK(multi.omega == single.omega);
    CHECK(multi.objective == doctest::Approx(single.objective));

    // c and -c have opposite betas, so the aggregate doubles the signed cost
    std::vector<double> neg(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) neg[j] = -c[j];
    BackgroundWeights both = compute_weights_multi({c, neg}, out, 0.3);
    std::vector<double> doubled(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) doubled[j] = 2.0 * c[j];
    BackgroundWeights agg = compute_weights(out, doubled, 0.3);
    CHECK(both.omega == agg.omega);

    CHECK_THROWS_AS((void)compute_weights_multi({}, out, 0.3), std::invalid_argument);
}

TEST_CASE("multi-sensitive matches the oracle on the aggregated objective") {
    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        int n1 = 4;
        std::vector<double> out(n1), c1(n1), c2(n1);
        for (int j = 0; j < n1; ++j) {
            out[j] = rng.uniform();
            c1[j] = rng.normal();
            c2[j] = rng.normal();
        }
        double lambda = rng.uniform();
        BackgroundWeights bw = compute_weights_multi({c1, c2}, out, lambda);
        std::vector<double> s1 = signed_costs(c1), s2 = signed_costs(c2);
        std::vector<double> agg(n1);
        for (int j = 0; j < n1; ++j) agg[j] = s1[j] + s2[j];
        OracleResult oracle = composition_oracle(out, agg, lambda);
        CHECK(bw.objective == doctest::Approx(oracle.objective).epsilon(1e-9));
    }
}

TEST_CASE("bootstrap averaging keeps the simplex and is deterministic") {
    Rng rng(41);
    const int n1 = 300;
    std::vector<double> out(n1), c(n1);
    for (int j = 0; j < n1; ++j) {
        out[j] = rng.uniform();
        c[j] = rng.normal();
    }
    Rng r1(7), r2(7);
    BackgroundWeights a = compute_weights_bootstrap(out, c, 0.5, 5, 100, r1);
    BackgroundWeights b = compute_weights_bootstrap(out, c, 0.5, 5, 100, r2);
    CHECK(a.averaged);
    CHECK(a.omega == b.omega);
    double total = 0.0;
    for (double w : a.omega) {
        CHECK(w >= 0.0);
        total += w;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));

    // below the threshold it falls through to the exact single solve
    Rng r3(7);
    std::vector<double> out_small(out.begin(), out.begin() + 50);
    std::vector<double> c_small(c.begin(), c.begin() + 50);
    BackgroundWeights exact = compute_weights_bootstrap(out_small, c_small, 0.5, 5, 100, r3);
    CHECK_FALSE(exact.averaged);
}

TEST_CASE("negative lambda is rejected") {
    std::vector<double> out{0.1, 0.2}, c{1.0, 2.0};
    CHECK_THROWS_AS((void)compute_weights(out, c, -1.0), std::invalid_argument);
}
