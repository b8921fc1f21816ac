#include "l2sep/generators.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "l2sep/rng.hpp"

namespace l2sep {
namespace {

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

void require(bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
}

MilpInstance empty_instance(const std::string& name, ClassTag tag, int n) {
    MilpInstance inst;
    inst.name = name;
    inst.class_tag = tag;
    inst.objective.assign(n, 0.0);
    inst.lb.assign(n, 0.0);
    inst.ub.assign(n, 1.0);
    inst.integer.assign(n, true);
    return inst;
}

std::string seed_name(const char* prefix, std::uint64_t seed) { return std::string(prefix) + "_" + std::to_string(seed); }

/// Dense random packing matrix; guarantees a positive entry per column.
std::vector<std::vector<double>> packing_matrix(Rng& rng, int n, int m, int lo, int hi) {
    std::vector<std::vector<double>> a(m, std::vector<double>(n));
    for (auto& row : a)
        for (auto& v : row) v = static_cast<double>(rng.uniform_int(lo, hi));
    for (int j = 0; j < n; ++j) {
        bool any = false;
        for (int i = 0; i < m; ++i) any = any || a[i][j] > 0.0;
        if (!any) a[rng.index(m)][j] = 1.0;
    }
    return a;
}

void add_dense_rows(MilpInstance& inst, const std::vector<std::vector<double>>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        SparseRow r;
        r.sense = RowSense::Le;
        r.rhs = b[i];
        for (std::size_t j = 0; j < a[i].size(); ++j)
            if (a[i][j] != 0.0) {
                r.idx.push_back(static_cast<int>(j));
                r.coef.push_back(a[i][j]);
            }
        inst.rows.push_back(std::move(r));
    }
}

}  // namespace

MilpInstance generate_packing(int n, int m, std::uint64_t seed) {
    require(n >= 1 && m >= 1, "generate_packing: n and m must be >= 1");
    Rng rng(seed);
    MilpInstance inst = empty_instance(seed_name("packing", seed), ClassTag::Packing, n);
    const auto a = packing_matrix(rng, n, m, 0, 5);
    std::vector<double> b(m);
    for (auto& v : b) v = static_cast<double>(rng.uniform_int(9 * n, 10 * n));
    for (int j = 0; j < n; ++j) inst.objective[j] = -static_cast<double>(rng.uniform_int(1, 10));
    for (int j = 0; j < n; ++j) {
        double u = kInf;
        for (int i = 0; i < m; ++i)
            if (a[i][j] > 0.0) u = std::min(u, std::floor(b[i] / a[i][j]));
        inst.ub[j] = u;
    }
    add_dense_rows(inst, a, b);
    inst.metadata = {{"generator", "packing"},  {"n", std::to_string(n)},         {"m", std::to_string(m)},
                     {"seed", std::to_string(seed)}, {"A", "U{0..5}"},           {"b", "U{9n..10n}"},
                     {"c", "U{1..10} (maximized)"},  {"bounds", "x_j in [0, min_i floor(b_i/A_ij)]"}};
    return inst;
}

MilpInstance generate_bin_packing(int n, int m, std::uint64_t seed) {
    require(n >= 1 && m >= 1, "generate_bin_packing: n and m must be >= 1");
    Rng rng(seed);
    MilpInstance inst = empty_instance(seed_name("bin_packing", seed), ClassTag::BinPacking, n);
    const auto a = packing_matrix(rng, n, m, 5, 30);
    std::vector<double> b(m);
    for (auto& v : b) v = static_cast<double>(rng.uniform_int(10 * n, 20 * n));
    for (int j = 0; j < n; ++j) inst.objective[j] = -static_cast<double>(rng.uniform_int(1, 10));
    add_dense_rows(inst, a, b);
    inst.metadata = {{"generator", "bin_packing"}, {"n", std::to_string(n)}, {"m", std::to_string(m)},
                     {"seed", std::to_string(seed)}, {"A", "U{5..30}"},     {"b", "U{10n..20n}"},
                     {"c", "U{1..10} (maximized)"}};
    return inst;
}

MilpInstance max_cut_from_graph(int n_vertices, const std::vector<Edge>& edges, const std::vector<double>& weights) {
    require(weights.size() == edges.size(), "max_cut_from_graph: one weight per edge required");
    const int ne = static_cast<int>(edges.size());
    MilpInstance inst = empty_instance("max_cut", ClassTag::MaxCut, n_vertices + ne);
    for (int e = 0; e < ne; ++e) {
        const auto [u, v] = edges[e];
        const int y = n_vertices + e;
        inst.objective[y] = -weights[e];
        inst.rows.push_back(make_row({y, u, v}, {1.0, -1.0, -1.0}, RowSense::Le, 0.0));
        inst.rows.push_back(make_row({y, u, v}, {1.0, 1.0, 1.0}, RowSense::Le, 2.0));
    }
    return inst;
}

MilpInstance generate_max_cut(int n_vertices, int n_edges, std::uint64_t seed) {
    require(n_vertices >= 2, "generate_max_cut: need at least two vertices");
    const long max_edges = static_cast<long>(n_vertices) * (n_vertices - 1) / 2;
    require(n_edges >= 1 && n_edges <= max_edges, "generate_max_cut: n_edges out of range");
    Rng rng(seed);
    std::vector<Edge> all;
    for (int u = 0; u < n_vertices; ++u)
        for (int v = u + 1; v < n_vertices; ++v) all.emplace_back(u, v);
    // partial Fisher-Yates: first n_edges entries form a uniform sample
    for (int k = 0; k < n_edges; ++k) std::swap(all[k], all[k + rng.index(all.size() - k)]);
    std::vector<Edge> edges(all.begin(), all.begin() + n_edges);
    std::sort(edges.begin(), edges.end());
    std::vector<double> w(n_edges);
    for (auto& x : w) x = static_cast<double>(rng.uniform_int(1, 10));
    MilpInstance inst = max_cut_from_graph(n_vertices, edges, w);
    inst.name = seed_name("max_cut", seed);
    inst.metadata = {{"generator", "max_cut"},          {"n_vertices", std::to_string(n_vertices)},
                     {"n_edges", std::to_string(n_edges)}, {"seed", std::to_string(seed)},
                     {"graph", "G(n,M) uniform"},        {"w", "U{1..10}"}};
    return inst;
}

AuctionParams sample_auction_params(std::uint64_t seed) {
    Rng rng(seed);
    AuctionParams p;
    p.value_deviation = rng.uniform(0.25, 0.75);
    p.add_item_prob = rng.uniform(0.5, 0.75);
    p.max_n_sub_bids = static_cast<int>(rng.uniform_int(3, 7));
    p.additivity = rng.uniform(-0.1, 0.4);
    p.budget_factor = rng.uniform(1.25, 1.75);
    p.resale_factor = rng.uniform(0.35, 0.65);
    return p;
}

std::vector<Bid> generate_bids(int n_items, int n_bids, const AuctionParams& p, std::uint64_t seed) {
    require(n_items >= 1 && n_bids >= 1, "generate_bids: need items and bids");
    Rng rng(seed);
    std::vector<double> values(n_items);
    for (auto& v : values) v = p.min_value + (p.max_value - p.min_value) * rng.uniform();

    // symmetric compatibilities, column-normalized
    std::vector<std::vector<double>> compat(n_items, std::vector<double>(n_items, 0.0));
    for (int i = 0; i < n_items; ++i)
        for (int j = i + 1; j < n_items; ++j) compat[i][j] = compat[j][i] = rng.uniform();
    std::vector<double> colsum(n_items, 0.0);
    for (int i = 0; i < n_items; ++i)
        for (int j = 0; j < n_items; ++j) colsum[j] += compat[i][j];
    for (int i = 0; i < n_items; ++i)
        for (int j = 0; j < n_items; ++j)
            if (colsum[j] > 0.0) compat[i][j] /= colsum[j];

    auto next_item = [&](const std::vector<char>& mask, const std::vector<double>& interests) {
        std::vector<double> prob(n_items, 0.0);
        int in_bundle = 0;
        for (int i = 0; i < n_items; ++i) in_bundle += mask[i];
        for (int j = 0; j < n_items; ++j) {
            if (mask[j]) continue;
            double c = 0.0;
            for (int i = 0; i < n_items; ++i)
                if (mask[i]) c += compat[i][j];
            prob[j] = interests[j] * c / std::max(1, in_bundle);
        }
        std::size_t pick = rng.weighted(prob);
        if (mask[pick]) {  // all-zero weights among free items: uniform over free items
            std::vector<int> free;
            for (int j = 0; j < n_items; ++j)
                if (!mask[j]) free.push_back(j);
            pick = static_cast<std::size_t>(free[rng.index(free.size())]);
        }
        return static_cast<int>(pick);
    };
    auto bundle_price = [&](const std::vector<int>& bundle, const std::vector<double>& priv) {
        double s = 0.0;
        for (int i : bundle) s += priv[i];
        return s + std::pow(static_cast<double>(bundle.size()), 1.0 + p.additivity);
    };
    auto bundle_of = [](const std::vector<char>& mask) {
        std::vector<int> b;
        for (int i = 0; i < static_cast<int>(mask.size()); ++i)
            if (mask[i]) b.push_back(i);
        return b;
    };

    std::vector<Bid> bids;
    int n_dummy = 0;
    int attempts = 0;
    while (static_cast<int>(bids.size()) < n_bids) {
        if (++attempts > 100 * n_bids) throw NumericalError("generate_bids: could not generate enough bids");
        std::vector<double> interests(n_items), priv(n_items);
        for (int i = 0; i < n_items; ++i) {
            interests[i] = rng.uniform();
            priv[i] = values[i] + p.max_value * p.value_deviation * (2.0 * interests[i] - 1.0);
        }
        std::vector<char> mask(n_items, 0);
        mask[rng.weighted(interests)] = 1;
        while (rng.uniform() < p.add_item_prob) {
            if (std::accumulate(mask.begin(), mask.end(), 0) == n_items) break;
            mask[next_item(mask, interests)] = 1;
        }
        const std::vector<int> bundle = bundle_of(mask);
        const double price = bundle_price(bundle, priv);
        if (price < 0.0) continue;

        std::vector<std::pair<std::vector<int>, double>> bidder{{bundle, price}};
        std::vector<std::pair<std::vector<int>, double>> candidates;
        for (int item : bundle) {
            std::vector<char> sub(n_items, 0);
            sub[item] = 1;
            while (std::accumulate(sub.begin(), sub.end(), 0) < static_cast<int>(bundle.size()))
                sub[next_item(sub, interests)] = 1;
            auto sb = bundle_of(sub);
            candidates.emplace_back(sb, bundle_price(sb, priv));
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        const double budget = p.budget_factor * price;
        double resale = 0.0;
        for (int i : bundle) resale += values[i];
        const double min_resale = p.resale_factor * resale;
        for (const auto& [sb, sp] : candidates) {
            if (static_cast<int>(bidder.size()) >= p.max_n_sub_bids + 1 ||
                static_cast<int>(bids.size() + bidder.size()) >= n_bids)
                break;
            if (sp < 0.0 || sp > budget) continue;
            double sv = 0.0;
            for (int i : sb) sv += values[i];
            if (sv < min_resale) continue;
            bool dup = false;
            for (const auto& [ob, op] : bidder) dup = dup || ob == sb;
            if (dup) continue;
            bidder.emplace_back(sb, sp);
        }
        std::vector<int> dummy;
        if (bidder.size() > 2) dummy.push_back(n_items + n_dummy++);
        for (auto& [b, pr] : bidder) {
            Bid bid;
            bid.items = b;
            bid.items.insert(bid.items.end(), dummy.begin(), dummy.end());
            bid.price = pr;
            bids.push_back(std::move(bid));
        }
    }
    bids.resize(n_bids);
    return bids;
}

MilpInstance comb_auction_from_bids(int n_items, const std::vector<Bid>& bids) {
    const int nb = static_cast<int>(bids.size());
    int max_item = n_items - 1;
    for (const auto& b : bids)
        for (int i : b.items) max_item = std::max(max_item, i);
    MilpInstance inst = empty_instance("comb_auction", ClassTag::CombAuction, nb);
    std::vector<std::vector<int>> by_item(max_item + 1);
    for (int b = 0; b < nb; ++b) {
        inst.objective[b] = -bids[b].price;
        for (int i : bids[b].items) by_item[i].push_back(b);
    }
    for (const auto& users : by_item) {
        if (users.empty()) continue;
        inst.rows.push_back(make_row(users, std::vector<double>(users.size(), 1.0), RowSense::Le, 1.0));
    }
    return inst;
}

MilpInstance generate_comb_auction(int n_items, int n_bids, std::uint64_t seed) {
    Rng rng(seed);
    const AuctionParams p = sample_auction_params(rng.fork());
    const auto bids = generate_bids(n_items, n_bids, p, rng.fork());
    MilpInstance inst = comb_auction_from_bids(n_items, bids);
    inst.name = seed_name("comb_auction", seed);
    inst.metadata = {{"generator", "comb_auction"},
                     {"n_items", std::to_string(n_items)},
                     {"n_bids", std::to_string(n_bids)},
                     {"seed", std::to_string(seed)},
                     {"value_deviation", num(p.value_deviation)},
                     {"add_item_prob", num(p.add_item_prob)},
                     {"max_n_sub_bids", std::to_string(p.max_n_sub_bids)},
                     {"additivity", num(p.additivity)},
                     {"budget_factor", num(p.budget_factor)},
                     {"resale_factor", num(p.resale_factor)}};
    return inst;
}

std::vector<Edge> barabasi_albert(int n, int affinity, std::uint64_t seed) {
    require(affinity >= 1 && affinity < n, "barabasi_albert: need 1 <= affinity < n");
    Rng rng(seed);
    std::vector<Edge> edges;
    std::vector<double> degree(n, 0.0);
    for (int v = 0; v < affinity; ++v) {
        edges.emplace_back(v, affinity);
        degree[v] += 1.0;
        degree[affinity] += 1.0;
    }
    for (int v = affinity + 1; v < n; ++v) {
        std::vector<double> w(degree.begin(), degree.begin() + v);
        for (int k = 0; k < affinity; ++k) {
            const std::size_t u = rng.weighted(w);
            w[u] = 0.0;  // without replacement
            edges.emplace_back(static_cast<int>(u), v);
        }
        for (int k = static_cast<int>(edges.size()) - affinity; k < static_cast<int>(edges.size()); ++k) {
            degree[edges[k].first] += 1.0;
            degree[v] += 1.0;
        }
    }
    std::sort(edges.begin(), edges.end());
    return edges;
}

std::vector<Edge> erdos_renyi(int n, double p, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Edge> edges;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v)
            if (rng.uniform() < p) edges.emplace_back(u, v);
    return edges;
}

MilpInstance indep_set_from_graph(int n_nodes, const std::vector<Edge>& edges) {
    MilpInstance inst = empty_instance("indep_set", ClassTag::IndepSet, n_nodes);
    for (int j = 0; j < n_nodes; ++j) inst.objective[j] = -1.0;
    for (const auto& [u, v] : edges) inst.rows.push_back(make_row({u, v}, {1.0, 1.0}, RowSense::Le, 1.0));
    return inst;
}

MilpInstance generate_indep_set(int n_nodes, std::uint64_t seed, IndepSetOptions opts) {
    require(n_nodes >= 2, "generate_indep_set: need at least two nodes");
    Rng rng(seed);
    const bool ba = rng.uniform() < 0.5;
    const double edge_prob = rng.uniform(0.005, 0.01);
    const int affinity = static_cast<int>(rng.uniform_int(2, 6));
    const double p_eff = std::min(1.0, edge_prob * opts.edge_prob_scale);
    std::vector<Edge> edges = ba ? barabasi_albert(n_nodes, std::min(affinity, n_nodes - 1), rng.fork())
                                 : erdos_renyi(n_nodes, p_eff, rng.fork());
    MilpInstance inst = indep_set_from_graph(n_nodes, edges);
    inst.name = seed_name("indep_set", seed);
    inst.metadata = {{"generator", "indep_set"},
                     {"n_nodes", std::to_string(n_nodes)},
                     {"seed", std::to_string(seed)},
                     {"graph_type", ba ? "barabasi_albert" : "erdos_renyi"},
                     {"edge_probability", num(edge_prob)},
                     {"edge_prob_scale", num(opts.edge_prob_scale)},
                     {"affinity", std::to_string(affinity)}};
    return inst;
}

GeneratorSpec default_generator_spec(ClassTag tag) {
    GeneratorSpec s;
    s.tag = tag;
    switch (tag) {
        case ClassTag::Packing: s.a = 60; s.b = 60; break;
        case ClassTag::BinPacking: s.a = 66; s.b = 132; break;
        case ClassTag::MaxCut: s.a = 54; s.b = 134; break;
        case ClassTag::CombAuction: s.a = 100; s.b = 500; break;
        case ClassTag::IndepSet: s.a = 500; break;
        case ClassTag::Custom: throw ConfigError("no generator for class 'custom'");
    }
    return s;
}

MilpInstance generate(const GeneratorSpec& spec, std::uint64_t seed) {
    switch (spec.tag) {
        case ClassTag::Packing: return generate_packing(spec.a, spec.b, seed);
        case ClassTag::BinPacking: return generate_bin_packing(spec.a, spec.b, seed);
        case ClassTag::MaxCut: return generate_max_cut(spec.a, spec.b, seed);
        case ClassTag::CombAuction: return generate_comb_auction(spec.a, spec.b, seed);
        case ClassTag::IndepSet: return generate_indep_set(spec.a, seed, spec.indep);
        case ClassTag::Custom: break;
    }
    throw ConfigError("no generator for class 'custom'");
}

}  // namespace l2sep
