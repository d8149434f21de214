// Output-space Wasserstein distance and the minimum-cost-flow formulation
// that computes stealthily biased background weights.

#ifndef FOOLSHAP_TRANSPORT_HPP
#define FOOLSHAP_TRANSPORT_HPP

#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

#include "foolshap/rng.hpp"

namespace foolshap {

// 1-D optimal transport cost between two weighted point sets; equals the
// L1 distance between quantile functions.
double wasserstein_1d(std::span<const double> values_a, std::span<const double> weights_a,
                      std::span<const double> values_b, std::span<const double> weights_b);

// Generic min-cost-flow graph solved by successive shortest augmenting
// paths with node potentials. Costs are doubles with eps = 1e-12 in
// comparisons; capacities are integral so the optimum is integral.
class McfGraph {
public:
    explicit McfGraph(int n_nodes);

    // returns edge id; a paired residual edge is created internally
    int add_edge(int from, int to, std::int64_t capacity, double cost);

    // routes required_flow units from source to sink, minimizing total cost;
    // throws if the network cannot carry the flow
    double solve(int source, int sink, std::int64_t required_flow);

    std::int64_t flow_on(int edge_id) const;
    int n_nodes() const { return static_cast<int>(adj_.size()); }

private:
    struct Edge {
        int to;
        std::int64_t cap;
        double cost;
    };
    std::vector<Edge> edges_;
    std::vector<std::vector<int>> adj_;
};

// The weight-computation network: source -> left node j (cost
// beta*coeffs[j]), left j -> right i (cost lambda*|f_i - f_j|), right i ->
// sink (capacity 1). Total flow N1.
struct FlowNetwork {
    std::vector<double> source_costs;  // per left node, sign already applied
    std::vector<double> outputs;       // f(z_j) for all background instances
    double lambda = 0.0;
};

struct BackgroundWeights {
    std::vector<double> omega;
    // sparse coupling triplets (i, j, pi_ij); empty for averaged solutions
    std::vector<std::tuple<int, int, double>> coupling;
    double wasserstein_cost = 0.0;
    double lambda = 0.0;
    double objective = 0.0;  // beta * sum omega_j c_j + lambda * W
    double weighted_sum = 0.0;  // beta * sum omega_j c_j
    bool averaged = false;   // true for bootstrap-averaged weights
};

// Exact solve of the FlowNetwork via its per-right-node decomposition
// (all non-sink capacities are infinite, so each unit routes
// independently). Matches the SSP solver; verified against it in tests.
BackgroundWeights solve_flow_network(const FlowNetwork& net);

// Algorithm-1 weights: beta = sign(sum coeffs) with +1 on a tie.
BackgroundWeights compute_weights(std::span<const double> d1_outputs,
                                  std::span<const double> coeffs, double lambda);

// Multi-sensitive variant: per-instance source cost sum_s beta_s coeffs_s[j].
BackgroundWeights compute_weights_multi(const std::vector<std::vector<double>>& coeffs_set,
                                        std::span<const double> d1_outputs, double lambda);

// Large-N1 path: K subsample solves of size at most max_solve, averaged
// over the full index range and renormalized. The multiple-of-1/N1
// property only holds for single solves.
BackgroundWeights compute_weights_bootstrap(std::span<const double> d1_outputs,
                                            std::span<const double> coeffs, double lambda,
                                            int replicates, int max_solve, Rng& rng);

}  // namespace foolshap

#endif
