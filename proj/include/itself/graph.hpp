#pragma once

// Superpixel graph and vertex saliency.
//
// Edges are ordered pairs (S,R): adjacency and transitive edges are symmetric
// and stored once with from < to; query edges point from a vertex to a query
// and are stored per direction, so a pair of queries yields two query edges.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "oisf.hpp"

namespace itself {

enum class EdgeClass { Adjacency, Transitive, Query };

inline const char* to_string(EdgeClass c) {
    switch (c) {
        case EdgeClass::Adjacency: return "adjacency";
        case EdgeClass::Transitive: return "transitive";
        case EdgeClass::Query: return "query";
    }
    return "?";
}

struct Edge {
    int from = 0;
    int to = 0;
    EdgeClass kind = EdgeClass::Adjacency;
    bool foreground = false;  // query edge into a foreground query (E_F)
    double base_weight = 0.0;
    double weight = 0.0;
};

struct SuperpixelGraph {
    int vertex_count = 0;
    std::vector<Edge> edges;
};

struct QuerySet {
    std::vector<int> foreground;
    std::vector<int> background;

    bool empty() const { return foreground.empty() && background.empty(); }
    std::size_t size() const { return foreground.size() + background.size(); }
};

class EmptyQuerySet : public Error {
public:
    using Error::Error;
};

/// Unordered superpixel pairs that touch under 8-adjacency, as (a,b) with a < b.
inline std::vector<std::pair<int, int>> adjacent_pairs(const LabelMap& lm) {
    std::set<std::pair<int, int>> pairs;
    const int w = lm.width, h = lm.height;
    auto add = [&](int a, int b) {
        if (a != b) pairs.emplace(std::min(a, b), std::max(a, b));
    };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int l = lm(x, y);
            if (x + 1 < w) add(l, lm(x + 1, y));
            if (y + 1 < h) {
                add(l, lm(x, y + 1));
                if (x + 1 < w) add(l, lm(x + 1, y + 1));
                if (x > 0) add(l, lm(x - 1, y + 1));
            }
        }
    }
    return {pairs.begin(), pairs.end()};
}

/// Pairs two hops apart through E_A that are not already adjacent.
inline std::vector<std::pair<int, int>> transitive_pairs(int vertex_count,
                                                         const std::vector<std::pair<int, int>>& adjacency) {
    std::vector<std::vector<int>> nb(static_cast<std::size_t>(vertex_count));
    for (auto [a, b] : adjacency) {
        nb[std::size_t(a)].push_back(b);
        nb[std::size_t(b)].push_back(a);
    }
    const std::set<std::pair<int, int>> adj(adjacency.begin(), adjacency.end());
    std::set<std::pair<int, int>> out;
    for (const auto& list : nb) {
        for (std::size_t i = 0; i < list.size(); ++i)
            for (std::size_t j = i + 1; j < list.size(); ++j) {
                const std::pair<int, int> e{std::min(list[i], list[j]), std::max(list[i], list[j])};
                if (e.first != e.second && !adj.count(e)) out.insert(e);
            }
    }
    return {out.begin(), out.end()};
}

/// Initial weights: psi on query edges, 1 - psi on adjacency and transitive edges.
inline SuperpixelGraph build_graph(const SuperpixelSegmentation& seg, const QuerySet& queries, double psi) {
    if (queries.empty()) throw EmptyQuerySet("build_graph: empty query set");
    if (psi < 0.0 || psi > 1.0) throw InvalidArgument("build_graph: psi must lie in [0,1]");
    const int n = seg.count();
    SuperpixelGraph g;
    g.vertex_count = n;

    const auto adjacency = adjacent_pairs(seg.label_map);
    for (auto [a, b] : adjacency) g.edges.push_back({a, b, EdgeClass::Adjacency, false, 1.0 - psi, 1.0 - psi});
    for (auto [a, b] : transitive_pairs(n, adjacency))
        g.edges.push_back({a, b, EdgeClass::Transitive, false, 1.0 - psi, 1.0 - psi});

    auto add_queries = [&](const std::vector<int>& ids, bool fg) {
        std::set<int> unique(ids.begin(), ids.end());
        for (int q : unique) {
            if (q < 0 || q >= n) throw InvalidArgument("build_graph: query id out of range");
            for (int s = 0; s < n; ++s)
                if (s != q) g.edges.push_back({s, q, EdgeClass::Query, fg, psi, psi});
        }
    };
    add_queries(queries.foreground, true);
    add_queries(queries.background, false);
    return g;
}

/// Gaussian color similarity between superpixel histograms:
/// sum_i sum_j exp(-||c_i - c_j|| / sigma_s) p(c_i,S) p(c_j,R).
/// Palette-pair terms are tabulated once; superpixel pairs are memoized.
class ColorSimilarity {
public:
    ColorSimilarity(const SuperpixelSegmentation& seg, const QuantizedPalette& palette, double sigma_s)
        : seg_(&seg), k_(palette.size()), kernel_(k_ * k_), memo_(std::size_t(seg.count()) * seg.count(), -1.0) {
        if (!(sigma_s > 0.0)) throw InvalidArgument("ColorSimilarity: sigma_s must be > 0");
        for (std::size_t i = 0; i < k_; ++i)
            for (std::size_t j = i; j < k_; ++j) {
                const double v = std::exp(-palette.distance(i, j) / sigma_s);
                kernel_[i * k_ + j] = kernel_[j * k_ + i] = v;
            }
        for (const Superpixel& sp : seg.superpixels)
            if (sp.histogram.empty() && sp.size > 0)
                throw InvalidArgument("ColorSimilarity: segmentation has no color histograms");
    }

    double operator()(int s, int r) {
        const std::size_t n = std::size_t(seg_->count());
        double& slot = memo_[std::size_t(s) * n + std::size_t(r)];
        if (slot >= 0.0) return slot;
        const auto& hs = seg_->superpixels[std::size_t(s)].histogram;
        const auto& hr = seg_->superpixels[std::size_t(r)].histogram;
        double sum = 0.0;
        for (auto [ci, pi] : hs) {
            const double* row = kernel_.data() + std::size_t(ci) * k_;
            double inner = 0.0;
            for (auto [cj, pj] : hr) inner += row[cj] * pj;
            sum += pi * inner;
        }
        slot = sum;
        memo_[std::size_t(r) * n + std::size_t(s)] = sum;
        return sum;
    }

private:
    const SuperpixelSegmentation* seg_;
    std::size_t k_;
    std::vector<double> kernel_;
    std::vector<double> memo_;
};

inline void weight_edges(SuperpixelGraph& graph, ColorSimilarity& similarity) {
    for (Edge& e : graph.edges) e.weight = e.base_weight * similarity(e.from, e.to);
}

inline SuperpixelGraph weight_edges(SuperpixelGraph graph, const SuperpixelSegmentation& seg,
                                    const QuantizedPalette& palette, double sigma_s) {
    ColorSimilarity sim(seg, palette, sigma_s);
    weight_edges(graph, sim);
    return graph;
}

/// Per-vertex saliency, min-max normalized.
///
/// e' is a similarity in [0, e]; its complement within the edge weight,
/// e - e', is the dissimilarity. Adjacency, transitive and background-query
/// edges contribute dissimilarity; foreground-query edges are inverted and
/// contribute similarity. Symmetric edges count for both endpoints, query
/// edges only for the vertex compared against the query.
inline std::vector<double> vertex_saliency_raw(const SuperpixelGraph& graph) {
    std::vector<double> vs(std::size_t(graph.vertex_count), 0.0);
    for (const Edge& e : graph.edges) {
        const double dissimilarity = e.base_weight - e.weight;
        switch (e.kind) {
            case EdgeClass::Adjacency:
            case EdgeClass::Transitive:
                vs[std::size_t(e.from)] += dissimilarity;
                vs[std::size_t(e.to)] += dissimilarity;
                break;
            case EdgeClass::Query:
                vs[std::size_t(e.from)] += e.foreground ? e.weight : dissimilarity;
                break;
        }
    }
    return vs;
}

inline std::vector<double> vertex_saliency(const SuperpixelGraph& graph) {
    return minmax_normalize(std::span<const double>(vertex_saliency_raw(graph)));
}

/// S(S) = VS(S) * PS(S), normalized and painted onto the pixels.
inline SaliencyMap apply_prior(std::span<const double> vs, std::span<const double> prior, const LabelMap& labels) {
    if (vs.size() != prior.size() || vs.size() != std::size_t(labels.count))
        throw InvalidArgument("apply_prior: score vector sizes differ");
    std::vector<double> prod(vs.size());
    for (std::size_t i = 0; i < vs.size(); ++i) prod[i] = vs[i] * prior[i];
    // An all-zero product carries no ranking; keep it zero rather than lifting it to 0.5.
    const bool all_zero = std::all_of(prod.begin(), prod.end(), [](double v) { return v == 0.0; });
    if (!all_zero) prod = minmax_normalize(std::span<const double>(prod));
    return rasterize(labels, prod);
}

/// One edge per line: from to class weight.
inline void dump_graph(const SuperpixelGraph& g, std::ostream& os) {
    os << "# vertices " << g.vertex_count << "\n";
    for (const Edge& e : g.edges) {
        os << e.from << ' ' << e.to << ' ' << to_string(e.kind);
        if (e.kind == EdgeClass::Query) os << (e.foreground ? "/fg" : "/bg");
        os << ' ' << e.weight << '\n';
    }
}

}  // namespace itself
