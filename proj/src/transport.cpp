#include "foolshap/transport.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace foolshap {

namespace {
constexpr double kEps = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

double wasserstein_1d(std::span<const double> values_a, std::span<const double> weights_a,
                      std::span<const double> values_b, std::span<const double> weights_b) {
    if (values_a.empty() || values_b.empty())
        throw std::invalid_argument("wasserstein_1d: empty sample");
    if (values_a.size() != weights_a.size() || values_b.size() != weights_b.size())
        throw std::invalid_argument("wasserstein_1d: values/weights length mismatch");

    auto normalize = [](std::span<const double> w) {
        double total = 0.0;
        for (double x : w) {
            if (x < 0.0) throw std::invalid_argument("wasserstein_1d: negative weight");
            total += x;
        }
        if (total <= 0.0) throw std::invalid_argument("wasserstein_1d: zero total weight");
        return total;
    };
    const double ta = normalize(weights_a);
    const double tb = normalize(weights_b);

    std::vector<int> ia(values_a.size()), ib(values_b.size());
    std::iota(ia.begin(), ia.end(), 0);
    std::iota(ib.begin(), ib.end(), 0);
    std::sort(ia.begin(), ia.end(), [&](int l, int r) { return values_a[l] < values_a[r]; });
    std::sort(ib.begin(), ib.end(), [&](int l, int r) { return values_b[l] < values_b[r]; });

    // sweep the merged support, integrating |F_a - F_b| dx
    double cost = 0.0, fa = 0.0, fb = 0.0;
    std::size_t pa = 0, pb = 0;
    double prev = 0.0;
    bool started = false;
    while (pa < ia.size() || pb < ib.size()) {
        double xa = pa < ia.size() ? values_a[ia[pa]] : kInf;
        double xb = pb < ib.size() ? values_b[ib[pb]] : kInf;
        double x = std::min(xa, xb);
        if (started) cost += std::abs(fa - fb) * (x - prev);
        while (pa < ia.size() && values_a[ia[pa]] == x) fa += weights_a[ia[pa++]] / ta;
        while (pb < ib.size() && values_b[ib[pb]] == x) fb += weights_b[ib[pb++]] / tb;
        prev = x;
        started = true;
    }
    return cost;
}

McfGraph::McfGraph(int n_nodes) : adj_(n_nodes) {}

int McfGraph::add_edge(int from, int to, std::int64_t capacity, double cost) {
    if (from < 0 || to < 0 || from >= n_nodes() || to >= n_nodes())
        throw std::invalid_argument("McfGraph: node index out of range");
    int id = static_cast<int>(edges_.size());
    edges_.push_back({to, capacity, cost});
    edges_.push_back({from, 0, -cost});
    adj_[from].push_back(id);
    adj_[to].push_back(id + 1);
    return id;
}

double McfGraph::solve(int source, int sink, std::int64_t required_flow) {
    const int n = n_nodes();
    std::vector<double> potential(n, 0.0);

    // Bellman-Ford to establish feasible potentials (negative costs allowed)
    {
        std::vector<double> dist(n, kInf);
        dist[source] = 0.0;
        for (int iter = 0; iter < n; ++iter) {
            bool changed = false;
            for (int u = 0; u < n; ++u) {
                if (dist[u] == kInf) continue;
                for (int eid : adj_[u]) {
                    const Edge& e = edges_[eid];
                    if (e.cap <= 0) continue;
                    if (dist[u] + e.cost < dist[e.to] - kEps) {
                        dist[e.to] = dist[u] + e.cost;
                        changed = true;
                    }
                }
            }
            if (!changed) break;
            if (iter == n - 1)
                throw std::runtime_error("McfGraph: negative cycle in network");
        }
        for (int u = 0; u < n; ++u)
            potential[u] = dist[u] == kInf ? 0.0 : dist[u];
    }

    double total_cost = 0.0;
    std::int64_t routed = 0;
    std::vector<double> dist(n);
    std::vector<int> parent_edge(n);

    while (routed < required_flow) {
        std::fill(dist.begin(), dist.end(), kInf);
        std::fill(parent_edge.begin(), parent_edge.end(), -1);
        dist[source] = 0.0;
        using Item = std::pair<double, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
        heap.push({0.0, source});
        while (!heap.empty()) {
            auto [du, u] = heap.top();
            heap.pop();
            if (du > dist[u] + kEps) continue;
            for (int eid : adj_[u]) {
                const Edge& e = edges_[eid];
                if (e.cap <= 0) continue;
                double reduced = e.cost + potential[u] - potential[e.to];
                if (reduced < -1e-6)
                    throw std::runtime_error("McfGraph: potentials inconsistent");
                if (reduced < 0.0) reduced = 0.0;
                if (dist[u] + reduced < dist[e.to] - kEps) {
                    dist[e.to] = dist[u] + reduced;
                    parent_edge[e.to] = eid;
                    heap.push({dist[e.to], e.to});
                }
            }
        }
        if (dist[sink] == kInf)
            throw std::runtime_error("McfGraph: network cannot carry the required flow");
        for (int u = 0; u < n; ++u)
            if (dist[u] < kInf) potential[u] += dist[u];

        std::int64_t push = required_flow - routed;
        for (int v = sink; v != source;) {
            const Edge& e = edges_[parent_edge[v]];
            push = std::min(push, e.cap);
            v = edges_[parent_edge[v] ^ 1].to;
        }
        for (int v = sink; v != source;) {
            Edge& e = edges_[parent_edge[v]];
            e.cap -= push;
            edges_[parent_edge[v] ^ 1].cap += push;
            total_cost += e.cost * static_cast<double>(push);
            v = edges_[parent_edge[v] ^ 1].to;
        }
        routed += push;
    }
    return total_cost;
}

std::int64_t McfGraph::flow_on(int edge_id) const {
    // flow equals the residual capacity accumulated on the reverse edge
    return edges_[edge_id + 1].cap;
}

BackgroundWeights solve_flow_network(const FlowNetwork& net) {
    const int n1 = static_cast<int>(net.source_costs.size());
    if (n1 == 0) throw std::invalid_argument("solve_flow_network: empty network");
    if (static_cast<int>(net.outputs.size()) != n1)
        throw std::invalid_argument("solve_flow_network: outputs/costs length mismatch");
    for (double c : net.source_costs)
        if (!std::isfinite(c)) throw std::invalid_argument("solve_flow_network: non-finite cost");

    BackgroundWeights bw;
    bw.lambda = net.lambda;
    bw.omega.assign(n1, 0.0);
    bw.coupling.reserve(n1);

    // Each unit of demand at right node i routes independently through the
    // cheapest left node, so the joint optimum is the per-i argmin. Ties
    // break to the lowest index.
    double objective = 0.0, wcost = 0.0, linear = 0.0;
    const double unit = 1.0 / static_cast<double>(n1);
    for (int i = 0; i < n1; ++i) {
        int best = 0;
        double best_cost = net.source_costs[0] + net.lambda * std::abs(net.outputs[i] - net.outputs[0]);
        for (int j = 1; j < n1; ++j) {
            double c = net.source_costs[j] + net.lambda * std::abs(net.outputs[i] - net.outputs[j]);
            if (c < best_cost - kEps) {
                best_cost = c;
                best = j;
            }
        }
        bw.omega[best] += unit;
        bw.coupling.emplace_back(i, best, unit);
        objective += best_cost * unit;
        wcost += std::abs(net.outputs[i] - net.outputs[best]) * unit;
        linear += net.source_costs[best] * unit;
    }
    bw.objective = objective;
    bw.wasserstein_cost = wcost;
    bw.weighted_sum = linear;
    return bw;
}

BackgroundWeights compute_weights(std::span<const double> d1_outputs,
                                  std::span<const double> coeffs, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("compute_weights: lambda must be >= 0");
    if (coeffs.empty() || coeffs.size() != d1_outputs.size())
        throw std::invalid_argument("compute_weights: coeffs/outputs length mismatch");
    double total = 0.0;
    for (double c : coeffs) total += c;
    double beta = total > 0.0 ? 1.0 : (total < 0.0 ? -1.0 : 1.0);
    if (total == 0.0)
        std::cerr << "compute_weights: coefficient sum is exactly zero, using beta = +1\n";

    FlowNetwork net;
    net.lambda = lambda;
    net.outputs.assign(d1_outputs.begin(), d1_outputs.end());
    net.source_costs.resize(coeffs.size());
    for (std::size_t j = 0; j < coeffs.size(); ++j) net.source_costs[j] = beta * coeffs[j];
    return solve_flow_network(net);
}

BackgroundWeights compute_weights_multi(const std::vector<std::vector<double>>& coeffs_set,
                                        std::span<const double> d1_outputs, double lambda) {
    if (coeffs_set.empty())
        throw std::invalid_argument("compute_weights_multi: empty sensitive-feature set");
    if (lambda < 0.0) throw std::invalid_argument("compute_weights_multi: lambda must be >= 0");
    const std::size_t n1 = d1_outputs.size();
    std::vector<double> aggregated(n1, 0.0);
    for (const auto& c : coeffs_set) {
        if (c.size() != n1)
            throw std::invalid_argument("compute_weights_multi: coefficient length mismatch");
        double total = 0.0;
        for (double v : c) total += v;
        double beta = total > 0.0 ? 1.0 : (total < 0.0 ? -1.0 : 1.0);
        for (std::size_t j = 0; j < n1; ++j) aggregated[j] += beta * c[j];
    }

    FlowNetwork net;
    net.lambda = lambda;
    net.outputs.assign(d1_outputs.begin(), d1_outputs.end());
    net.source_costs = std::move(aggregated);
    return solve_flow_network(net);
}

BackgroundWeights compute_weights_bootstrap(std::span<const double> d1_outputs,
                                            std::span<const double> coeffs, double lambda,
                                            int replicates, int max_solve, Rng& rng) {
    const int n1 = static_cast<int>(d1_outputs.size());
    if (n1 <= max_solve) return compute_weights(d1_outputs, coeffs, lambda);
    if (replicates < 1)
        throw std::invalid_argument("compute_weights_bootstrap: need at least one replicate");

    BackgroundWeights bw;
    bw.lambda = lambda;
    bw.omega.assign(n1, 0.0);
    for (int r = 0; r < replicates; ++r) {
        std::vector<int> sub = rng.sample_without_replacement(n1, max_solve);
        std::sort(sub.begin(), sub.end());
        std::vector<double> out_sub(max_solve), c_sub(max_solve);
        for (int k = 0; k < max_solve; ++k) {
            out_sub[k] = d1_outputs[sub[k]];
            c_sub[k] = coeffs[sub[k]];
        }
        BackgroundWeights piece = compute_weights(out_sub, c_sub, lambda);
        for (int k = 0; k < max_solve; ++k) bw.omega[sub[k]] += piece.omega[k];
    }
    double total = 0.0;
    for (double w : bw.omega) total += w;
    for (double& w : bw.omega) w /= total;

    bw.averaged = true;
    bw.coupling.clear();
    // Wasserstein cost for the averaged weights via the exact 1-D oracle
    std::vector<double> uniform(n1, 1.0 / static_cast<double>(n1));
    bw.wasserstein_cost = wasserstein_1d(d1_outputs, uniform, d1_outputs, bw.omega);
    double total_c = 0.0;
    for (double c : coeffs) total_c += c;
    double beta = total_c >= 0.0 ? 1.0 : -1.0;
    bw.weighted_sum = 0.0;
    for (int j = 0; j < n1; ++j) bw.weighted_sum += beta * bw.omega[j] * coeffs[j];
    bw.objective = bw.weighted_sum + lambda * bw.wasserstein_cost;
    return bw;
}

}  // namespace foolshap
