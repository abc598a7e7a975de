#include <gtest/gtest.h>

#include <random>
#include <set>

#include "support.hpp"

using namespace itself;

namespace {

SuperpixelSegmentation strip(int n) {
    // One pixel per superpixel, laid out in a row.
    const LabImage img = rgb_to_lab(testing_support::solid(n, 1, 10, 10, 10));
    return describe_segmentation(testing_support::block_labels(n, 1, 1, 1), img);
}

std::set<std::pair<int, int>> edge_set(const SuperpixelGraph& g, EdgeClass kind) {
    std::set<std::pair<int, int>> out;
    for (const Edge& e : g.edges)
        if (e.kind == kind) out.emplace(e.from, e.to);
    return out;
}

}  // namespace

TEST(Graph, TwoPixelStrip) {
    const auto seg = strip(2);
    const auto g = build_graph(seg, QuerySet{{}, {0}}, 0.5);
    EXPECT_EQ(edge_set(g, EdgeClass::Adjacency), (std::set<std::pair<int, int>>{{0, 1}}));
    EXPECT_TRUE(edge_set(g, EdgeClass::Transitive).empty());
    EXPECT_EQ(edge_set(g, EdgeClass::Query), (std::set<std::pair<int, int>>{{1, 0}}));
}

TEST(Graph, ThreePixelStripHasOneTransitiveEdge) {
    const auto seg = strip(3);
    const auto g = build_graph(seg, QuerySet{{1}, {}}, 0.3);
    EXPECT_EQ(edge_set(g, EdgeClass::Adjacency), (std::set<std::pair<int, int>>{{0, 1}, {1, 2}}));
    EXPECT_EQ(edge_set(g, EdgeClass::Transitive), (std::set<std::pair<int, int>>{{0, 2}}));
    for (const Edge& e : g.edges) {
        if (e.kind == EdgeClass::Query) {
            EXPECT_TRUE(e.foreground);
            EXPECT_DOUBLE_EQ(e.base_weight, 0.3);
        } else {
            EXPECT_DOUBLE_EQ(e.base_weight, 0.7);
        }
    }
}

TEST(Graph, EdgeSetsMatchBruteForce) {
    std::mt19937 rng(3);
    const LabImage img = rgb_to_lab(testing_support::random_rgb(40, 40, rng));
    OisfParams p;
    p.n = 25;
    const auto seg = oisf_segment(img, testing_support::random_map(40, 40, rng), p);
    const int n = seg.count();

    // Oracle adjacency: any pair of 8-neighbouring pixels with different labels.
    std::vector<std::vector<char>> adj(std::size_t(n), std::vector<char>(std::size_t(n), 0));
    const auto& lm = seg.label_map;
    for (int y = 0; y < lm.height; ++y)
        for (int x = 0; x < lm.width; ++x)
            for (auto [dx, dy] : detail::kNeighbors8) {
                const int qx = x + dx, qy = y + dy;
                if (qx < 0 || qy < 0 || qx >= lm.width || qy >= lm.height) continue;
                const int a = lm(x, y), b = lm(qx, qy);
                if (a != b) adj[std::size_t(a)][std::size_t(b)] = 1;
            }
    std::set<std::pair<int, int>> want_a, want_t;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            if (adj[std::size_t(a)][std::size_t(b)]) {
                want_a.emplace(a, b);
                continue;
            }
            for (int c = 0; c < n; ++c)
                if (adj[std::size_t(a)][std::size_t(c)] && adj[std::size_t(c)][std::size_t(b)]) {
                    want_t.emplace(a, b);
                    break;
                }
        }
    const auto g = build_graph(seg, QuerySet{{0, 3}, {5}}, 0.5);
    EXPECT_EQ(edge_set(g, EdgeClass::Adjacency), want_a);
    EXPECT_EQ(edge_set(g, EdgeClass::Transitive), want_t);
    // Every vertex points to every query but itself, queries included.
    EXPECT_EQ(edge_set(g, EdgeClass::Query).size(), std::size_t(3 * (n - 1)));
}

TEST(Graph, RejectsEmptyQueriesAndBadPsi) {
    const auto seg = strip(3);
    EXPECT_THROW(build_graph(seg, QuerySet{}, 0.5), EmptyQuerySet);
    EXPECT_THROW(build_graph(seg, QuerySet{{0}, {}}, 1.5), InvalidArgument);
}

TEST(ColorSimilarity, MatchesDoubleLoop) {
    std::mt19937 rng(5);
    const LabImage img = rgb_to_lab(testing_support::random_rgb(30, 30, rng));
    const QuantizedPalette pal = quantize(img);
    OisfParams p;
    p.n = 12;
    const auto seg = oisf_segment(img, testing_support::random_map(30, 30, rng), p, &pal);
    ColorSimilarity sim(seg, pal, 0.4);
    for (int s = 0; s < seg.count(); ++s)
        for (int r = 0; r < seg.count(); ++r) {
            // Oracle from raw pixel counts rather than the stored histograms.
            std::vector<double> hs(pal.size(), 0.0), hr(pal.size(), 0.0);
            for (std::size_t q = 0; q < img.pixel_count(); ++q) {
                if (seg.label_map.labels[q] == s) hs[std::size_t(pal.pixel_to_color[q])] += 1.0;
                if (seg.label_map.labels[q] == r) hr[std::size_t(pal.pixel_to_color[q])] += 1.0;
            }
            double ns = 0, nr = 0;
            for (double v : hs) ns += v;
            for (double v : hr) nr += v;
            double want = 0.0;
            for (std::size_t i = 0; i < pal.size(); ++i)
                for (std::size_t j = 0; j < pal.size(); ++j) {
                    double d2 = 0;
                    for (int c = 0; c < 3; ++c) d2 += std::pow(pal.colors[i][c] - pal.colors[j][c], 2);
                    want += std::exp(-std::sqrt(d2 / 3.0) / 0.4) * hs[i] / ns * hr[j] / nr;
                }
            EXPECT_NEAR(sim(s, r), want, 1e-12);
        }
}

TEST(ColorSimilarity, SingleColorPairsAtDistanceSigma) {
    // Two single-color superpixels whose colors sit exactly sigma_s apart give exp(-1).
    RgbImage rgb = testing_support::solid(2, 1, 0, 0, 0);
    rgb.at(1, 0)[0] = rgb.at(1, 0)[1] = rgb.at(1, 0)[2] = 255;
    const LabImage img = rgb_to_lab(rgb);
    const QuantizedPalette pal = quantize(img);
    const auto seg = describe_segmentation(testing_support::block_labels(2, 1, 1, 1), img, &pal);
    const double d = pal.distance(0, 1);
    ColorSimilarity sim(seg, pal, d);
    EXPECT_NEAR(sim(0, 1), std::exp(-1.0), 1e-12);
    EXPECT_NEAR(sim(0, 0), 1.0, 1e-12);
}

TEST(WeightEdges, SymmetricAndBoundedByBaseWeight) {
    std::mt19937 rng(7);
    const LabImage img = rgb_to_lab(testing_support::random_rgb(32, 32, rng));
    const QuantizedPalette pal = quantize(img);
    OisfParams p;
    p.n = 20;
    const auto seg = oisf_segment(img, testing_support::random_map(32, 32, rng), p, &pal);
    const auto g = weight_edges(build_graph(seg, QuerySet{{1}, {2, 3}}, 0.5), seg, pal, 0.4);
    ColorSimilarity sim(seg, pal, 0.4);
    for (const Edge& e : g.edges) {
        EXPECT_GE(e.weight, 0.0);
        EXPECT_LE(e.weight, e.base_weight + 1e-15);
        EXPECT_DOUBLE_EQ(sim(e.from, e.to), sim(e.to, e.from));
    }
}

TEST(VertexSaliency, MatchesSummationOracle) {
    std::mt19937 rng(11);
    const LabImage img = rgb_to_lab(testing_support::random_rgb(32, 32, rng));
    const QuantizedPalette pal = quantize(img);
    OisfParams p;
    p.n = 15;
    const auto seg = oisf_segment(img, testing_support::random_map(32, 32, rng), p, &pal);
    const QuerySet q{{0, 4}, {7}};
    const double psi = 0.4;
    const auto g = weight_edges(build_graph(seg, q, psi), seg, pal, 0.4);
    const auto vs = vertex_saliency_raw(g);

    ColorSimilarity sim(seg, pal, 0.4);
    const auto adj = adjacent_pairs(seg.label_map);
    const auto tr = transitive_pairs(seg.count(), adj);
    std::vector<double> want(std::size_t(seg.count()), 0.0);
    for (auto list : {adj, tr})
        for (auto [a, b] : list) {
            const double dis = (1 - psi) * (1 - sim(a, b));
            want[std::size_t(a)] += dis;
            want[std::size_t(b)] += dis;
        }
    for (int s = 0; s < seg.count(); ++s) {
        for (int f : q.foreground)
            if (f != s) want[std::size_t(s)] += psi * sim(s, f);
        for (int b : q.background)
            if (b != s) want[std::size_t(s)] += psi * (1 - sim(s, b));
    }
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(vs[i], want[i], 1e-12);

    const auto norm = vertex_saliency(g);
    EXPECT_NEAR(*std::min_element(norm.begin(), norm.end()), 0.0, 1e-15);
    EXPECT_NEAR(*std::max_element(norm.begin(), norm.end()), 1.0, 1e-15);
}

TEST(VertexSaliency, InvariantToScalingTheWeights) {
    std::mt19937 rng(13);
    const LabImage img = rgb_to_lab(testing_support::random_rgb(24, 24, rng));
    const QuantizedPalette pal = quantize(img);
    OisfParams p;
    p.n = 10;
    const auto seg = oisf_segment(img, testing_support::random_map(24, 24, rng), p, &pal);
    auto g = weight_edges(build_graph(seg, QuerySet{{2}, {5}}, 0.5), seg, pal, 0.4);
    const auto a = vertex_saliency(g);
    for (Edge& e : g.edges) {
        e.weight *= 3.0;
        e.base_weight *= 3.0;
    }
    const auto b = vertex_saliency(g);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(ApplyPrior, ZeroPriorAnnihilatesAndOnesKeepRanking) {
    const LabelMap lm = testing_support::block_labels(4, 2, 2, 2);
    const std::vector<double> vs{0.2, 0.9};
    const auto zero = apply_prior(vs, std::vector<double>{0.0, 0.0}, lm);
    for (double v : zero.values) EXPECT_EQ(v, 0.0);
    const auto same = apply_prior(vs, std::vector<double>{1.0, 1.0}, lm);
    EXPECT_EQ(same(0, 0), 0.0);
    EXPECT_EQ(same(3, 1), 1.0);
    EXPECT_THROW(apply_prior(vs, std::vector<double>{1.0}, lm), InvalidArgument);
}

TEST(DumpGraph, OneLinePerEdge) {
    const auto seg = strip(3);
    const auto g = build_graph(seg, QuerySet{{0}, {}}, 0.5);
    std::ostringstream os;
    dump_graph(g, os);
    const std::string s = os.str();
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), std::ptrdiff_t(g.edges.size() + 1));
    EXPECT_NE(s.find("query/fg"), std::string::npos);
}
