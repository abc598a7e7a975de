#pragma once

// Query selection: unsupervised optimum-path-forest clustering of superpixel
// colors, border-based multi-map saliency, and threshold queries from a map.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <queue>
#include <tuple>
#include <vector>

#include "core.hpp"
#include "graph.hpp"
#include "oisf.hpp"

namespace itself {

struct ClusterAssignment {
    std::vector<int> cluster_of;             // per sample
    int count = 0;
    int k = 0;                               // neighborhood size that minimized the normalized cut
    std::vector<std::vector<int>> members;   // S_g
    std::vector<std::vector<int>> border;    // B_g, superpixels of S_g touching the image border
};

/// Result of one OPF run with a fixed k.
struct OpfForest {
    std::vector<int> label;
    std::vector<int> root;
    std::vector<double> density;
    int clusters = 0;
    double normalized_cut = 0.0;
};

constexpr double kOpfSameColor = 1e-9;

namespace detail {

inline double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace detail

/// Unsupervised OPF over `samples` with a fixed k.
///
/// Density is a Gaussian kernel average over the k nearest neighbors with
/// sigma = df/3, df being the largest k-NN distance in the graph, rescaled
/// to [1,1000]. Roots are density maxima; the forest maximizes the minimum
/// density along paths. Plateau arcs are made symmetric.
inline OpfForest opf_forest(const std::vector<std::vector<double>>& samples, int k,
                            const std::vector<std::vector<int>>& neighbors,
                            const std::vector<std::vector<double>>& dist) {
    const int n = static_cast<int>(samples.size());
    OpfForest f;
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    double df = 0.0;
    for (int s = 0; s < n; ++s) {
        adj[std::size_t(s)].assign(neighbors[std::size_t(s)].begin(), neighbors[std::size_t(s)].begin() + k);
        df = std::max(df, dist[std::size_t(s)][std::size_t(adj[std::size_t(s)].back())]);
    }

    f.density.assign(std::size_t(n), 0.0);
    const double sigma = df / 3.0;
    for (int s = 0; s < n; ++s) {
        double sum = 0.0;
        for (int t : adj[std::size_t(s)]) {
            const double d = dist[std::size_t(s)][std::size_t(t)];
            sum += sigma > 0.0 ? std::exp(-d * d / (2.0 * sigma * sigma)) : 1.0;
        }
        f.density[std::size_t(s)] = sum / double(k);
    }
    const auto [lo, hi] = std::minmax_element(f.density.begin(), f.density.end());
    const double mn = *lo, mx = *hi;
    for (double& d : f.density) d = mx > mn ? 999.0 * (d - mn) / (mx - mn) + 1.0 : 1000.0;

    for (int s = 0; s < n; ++s)
        for (int t : adj[std::size_t(s)]) {
            if (f.density[std::size_t(s)] != f.density[std::size_t(t)]) continue;
            auto& back = adj[std::size_t(t)];
            if (std::find(back.begin(), back.end(), s) == back.end()) back.push_back(s);
        }

    // Max-heap on path value; equal values leave in insertion order.
    std::vector<double> pathval(static_cast<std::size_t>(n));
    std::vector<int> pred(std::size_t(n), -1);
    f.label.assign(std::size_t(n), -1);
    f.root.assign(std::size_t(n), -1);
    std::vector<std::uint64_t> stamp(static_cast<std::size_t>(n));
    std::vector<char> done(std::size_t(n), 0);
    using Entry = std::tuple<double, std::int64_t, int>;  // (value, -stamp, sample)
    std::priority_queue<Entry> heap;
    std::uint64_t counter = 0;
    for (int s = 0; s < n; ++s) {
        pathval[std::size_t(s)] = f.density[std::size_t(s)] - 1.0;
        f.root[std::size_t(s)] = s;
        stamp[std::size_t(s)] = counter;
        heap.emplace(pathval[std::size_t(s)], -std::int64_t(counter++), s);
    }
    int next_label = 0;
    while (!heap.empty()) {
        const auto [val, neg_stamp, s] = heap.top();
        heap.pop();
        if (done[std::size_t(s)] || std::uint64_t(-neg_stamp) != stamp[std::size_t(s)]) continue;
        done[std::size_t(s)] = 1;
        if (pred[std::size_t(s)] == -1) {
            pathval[std::size_t(s)] = f.density[std::size_t(s)];
            f.label[std::size_t(s)] = next_label++;
        }
        for (int t : adj[std::size_t(s)]) {
            if (done[std::size_t(t)]) continue;
            const double tmp = std::min(pathval[std::size_t(s)], f.density[std::size_t(t)]);
            if (tmp > pathval[std::size_t(t)]) {
                pathval[std::size_t(t)] = tmp;
                pred[std::size_t(t)] = s;
                f.root[std::size_t(t)] = f.root[std::size_t(s)];
                f.label[std::size_t(t)] = f.label[std::size_t(s)];
                stamp[std::size_t(t)] = counter;
                heap.emplace(tmp, -std::int64_t(counter++), t);
            }
        }
    }
    f.clusters = next_label;

    // Normalized cut over the k-NN arcs, weights 1/d.
    std::vector<double> intra(std::size_t(f.clusters), 0.0), inter(std::size_t(f.clusters), 0.0);
    for (int s = 0; s < n; ++s)
        for (int i = 0; i < k; ++i) {
            const int t = neighbors[std::size_t(s)][std::size_t(i)];
            const double d = dist[std::size_t(s)][std::size_t(t)];
            if (!(d > 0.0)) continue;
            const int l = f.label[std::size_t(s)];
            (f.label[std::size_t(t)] == l ? intra : inter)[std::size_t(l)] += 1.0 / d;
        }
    f.normalized_cut = 0.0;
    for (int l = 0; l < f.clusters; ++l) {
        const double tot = intra[std::size_t(l)] + inter[std::size_t(l)];
        if (tot > 0.0) f.normalized_cut += inter[std::size_t(l)] / tot;
    }
    return f;
}

/// Clusters arbitrary feature vectors; k is searched in [1, ceil(sqrt(N))]
/// (capped at N-1) for the minimum normalized cut, ties to the smaller k.
inline ClusterAssignment opf_cluster(const std::vector<std::vector<double>>& samples) {
    const int n = static_cast<int>(samples.size());
    if (n < 2) throw InvalidArgument("opf_cluster: at least two samples required");

    std::vector<std::vector<double>> dist(std::size_t(n), std::vector<double>(std::size_t(n), 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            dist[std::size_t(i)][std::size_t(j)] = dist[std::size_t(j)][std::size_t(i)] =
                detail::euclidean(samples[std::size_t(i)], samples[std::size_t(j)]);
    // Superpixels of one flat color differ only by summation rounding. Left
    // as is, those ~1e-16 distances give a flat region distinct densities and
    // k-NN lists, and it splits into many clusters at no normalized-cut cost.
    for (auto& row : dist)
        for (double& d : row)
            if (d < kOpfSameColor) d = 0.0;
    std::vector<std::vector<int>> neighbors(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto& nb = neighbors[std::size_t(i)];
        for (int j = 0; j < n; ++j)
            if (j != i) nb.push_back(j);
        std::stable_sort(nb.begin(), nb.end(), [&](int a, int b) {
            return dist[std::size_t(i)][std::size_t(a)] < dist[std::size_t(i)][std::size_t(b)];
        });
    }

    const int kmax = std::min(n - 1, static_cast<int>(std::ceil(std::sqrt(double(n)))));
    OpfForest best;
    int best_k = 0;
    for (int k = 1; k <= kmax; ++k) {
        OpfForest f = opf_forest(samples, k, neighbors, dist);
        if (best_k == 0 || f.normalized_cut < best.normalized_cut) {
            best = std::move(f);
            best_k = k;
        }
    }

    ClusterAssignment out;
    out.k = best_k;
    out.count = best.clusters;
    out.cluster_of = best.label;
    out.members.assign(std::size_t(out.count), {});
    out.border.assign(std::size_t(out.count), {});
    for (int s = 0; s < n; ++s) out.members[std::size_t(out.cluster_of[std::size_t(s)])].push_back(s);
    return out;
}

/// Clusters superpixels by mean normalized Lab color and fills B_g.
inline ClusterAssignment opf_cluster(const SuperpixelSegmentation& seg) {
    std::vector<std::vector<double>> samples;
    for (const Superpixel& sp : seg.superpixels) samples.emplace_back(sp.mean_normalized.begin(), sp.mean_normalized.end());
    ClusterAssignment out = opf_cluster(samples);
    for (int s = 0; s < seg.count(); ++s)
        if (seg.superpixels[std::size_t(s)].touches_border)
            out.border[std::size_t(out.cluster_of[std::size_t(s)])].push_back(s);
    return out;
}

class NoBoundaryCluster : public Error {
public:
    using Error::Error;
};

struct BorderQueryResult {
    std::vector<double> scores;  // per superpixel, CS(S)
    SaliencyMap map;
    std::vector<double> weights;  // w_g per cluster (0 for clusters without border superpixels)
};

/// sum_g w_g * maps[g] / sum_g w_g. Maps with zero weight are skipped.
inline std::vector<double> combine_cluster_maps(const std::vector<std::vector<double>>& maps,
                                                const std::vector<double>& weights) {
    if (maps.size() != weights.size()) throw InvalidArgument("combine_cluster_maps: size mismatch");
    std::vector<double> acc;
    double total = 0.0;
    for (std::size_t g = 0; g < maps.size(); ++g) {
        if (!(weights[g] > 0.0)) continue;
        if (acc.empty()) acc.assign(maps[g].size(), 0.0);
        if (maps[g].size() != acc.size()) throw InvalidArgument("combine_cluster_maps: map sizes differ");
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += weights[g] * maps[g][i];
        total += weights[g];
    }
    if (!(total > 0.0)) throw NoBoundaryCluster("border_query_saliency: no cluster touches the image border");
    for (double& v : acc) v /= total;
    return acc;
}

/// Weighted average of per-cluster maps, each computed with the cluster's
/// border superpixels as background queries. Weights w_g = |B_g|/|S_g|.
inline BorderQueryResult border_query_saliency(const SuperpixelSegmentation& seg, ColorSimilarity& similarity,
                                               const ClusterAssignment& clusters, double psi) {
    BorderQueryResult out;
    out.weights.assign(std::size_t(clusters.count), 0.0);
    std::vector<std::vector<double>> maps(std::size_t(clusters.count));
    for (int g = 0; g < clusters.count; ++g) {
        const auto& b = clusters.border[std::size_t(g)];
        if (b.empty()) continue;
        QuerySet q;
        q.background = b;
        SuperpixelGraph graph = build_graph(seg, q, psi);
        weight_edges(graph, similarity);
        maps[std::size_t(g)] = vertex_saliency(graph);
        out.weights[std::size_t(g)] = double(b.size()) / double(clusters.members[std::size_t(g)].size());
    }
    out.scores = combine_cluster_maps(maps, out.weights);
    out.map = rasterize(seg.label_map, out.scores);
    return out;
}

inline BorderQueryResult border_query_saliency(const SuperpixelSegmentation& seg, const QuantizedPalette& palette,
                                               const ClusterAssignment& clusters, double psi, double sigma_s) {
    ColorSimilarity sim(seg, palette, sigma_s);
    return border_query_saliency(seg, sim, clusters, psi);
}

enum class Polarity { Foreground, Background, Both };

/// Superpixels whose mean map value is above (foreground) or below
/// (background) the mean of the per-superpixel means. `Both` returns the two
/// sides together and fails only when the foreground side is empty.
inline QuerySet saliency_queries(const SuperpixelSegmentation& seg, const SaliencyMap& map, Polarity polarity) {
    const std::vector<double> means = superpixel_means(seg.label_map, map);
    const double mu = mean(std::span<const double>(means));
    QuerySet q;
    for (std::size_t i = 0; i < means.size(); ++i) {
        if (polarity != Polarity::Background && means[i] > mu) q.foreground.push_back(int(i));
        if (polarity != Polarity::Foreground && means[i] < mu) q.background.push_back(int(i));
    }
    const bool empty = polarity == Polarity::Background ? q.background.empty() : q.foreground.empty();
    if (empty) throw EmptyQuerySet("saliency_queries: no superpixel passes the mean threshold");
    return q;
}

}  // namespace itself
