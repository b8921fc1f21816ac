#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "l2sep/instance.hpp"

namespace l2sep {

using Edge = std::pair<int, int>;

/// Integer packing  max c'x  s.t.  Ax <= b, x in Z_+  (stored negated, min-form).
/// Coefficients A ~ U{0..5}, c ~ U{1..10}, b ~ U{9n..10n}; every column gets
/// at least one positive entry so the box ub_j = min_i floor(b_i / A_ij) is finite.
MilpInstance generate_packing(int n, int m, std::uint64_t seed);

/// Binary packing: A ~ U{5..30}, c ~ U{1..10}, b ~ U{10n..20n}, x in {0,1}^n.
MilpInstance generate_bin_packing(int n, int m, std::uint64_t seed);

/// Max cut with vertex side variables x_v and edge cut indicators y_e:
///   max sum w_e y_e  s.t.  y_e <= x_u + x_v,  y_e <= 2 - x_u - x_v.
/// n_vars = n_vertices + n_edges, n_rows = 2 * n_edges. Weights w_e ~ U{1..10}.
/// Edges are drawn uniformly without replacement (G(n, M) model).
MilpInstance generate_max_cut(int n_vertices, int n_edges, std::uint64_t seed);
MilpInstance max_cut_from_graph(int n_vertices, const std::vector<Edge>& edges, const std::vector<double>& weights);

/// Per-instance auction parameters, drawn from the ranges of the benchmark table.
struct AuctionParams {
    double value_deviation = 0.5;
    double add_item_prob = 0.65;
    int max_n_sub_bids = 5;
    double additivity = 0.2;
    double budget_factor = 1.5;
    double resale_factor = 0.5;
    double min_value = 1.0;
    double max_value = 100.0;
};

struct Bid {
    std::vector<int> items;  // includes dummy XOR items (index >= n_items)
    double price = 0.0;
};

/// Arbitrary-relationships combinatorial auction (CATS style) winner determination:
///   max sum price_b x_b  s.t.  sum_{b contains i} x_b <= 1 for every item i used by a bid.
/// n_vars = n_bids; one row per item (real or dummy) that appears in at least one bid.
MilpInstance generate_comb_auction(int n_items, int n_bids, std::uint64_t seed);
AuctionParams sample_auction_params(std::uint64_t seed);
std::vector<Bid> generate_bids(int n_items, int n_bids, const AuctionParams& p, std::uint64_t seed);
MilpInstance comb_auction_from_bids(int n_items, const std::vector<Bid>& bids);

enum class GraphType : std::uint8_t { BarabasiAlbert, ErdosRenyi };

struct IndepSetOptions {
    /// Multiplier on the sampled edge probability. 1 at the benchmark size (500 nodes);
    /// smaller graphs use 500 / n_nodes to keep the expected degree comparable.
    double edge_prob_scale = 1.0;
};

/// Maximum independent set with edge constraints x_u + x_v <= 1 only.
/// graph_type ~ U{barabasi_albert, erdos_renyi}, edge_probability ~ U[0.005, 0.01],
/// affinity ~ U{2..6}. n_vars = n_nodes, n_rows = |E| (BA: affinity * (n - affinity)).
MilpInstance generate_indep_set(int n_nodes, std::uint64_t seed, IndepSetOptions opts = {});
MilpInstance indep_set_from_graph(int n_nodes, const std::vector<Edge>& edges);

std::vector<Edge> barabasi_albert(int n, int affinity, std::uint64_t seed);
std::vector<Edge> erdos_renyi(int n, double p, std::uint64_t seed);

/// Dispatch by class with default (benchmark) or scaled dimensions.
struct GeneratorSpec {
    ClassTag tag = ClassTag::Packing;
    int a = 0;  // n / n_vertices / n_items / n_nodes
    int b = 0;  // m / n_edges / n_bids / unused
    IndepSetOptions indep;
};
GeneratorSpec default_generator_spec(ClassTag tag);
MilpInstance generate(const GeneratorSpec& spec, std::uint64_t seed);

}  // namespace l2sep
