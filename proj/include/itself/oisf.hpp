#pragma once

// Object-based superpixels: OSMOX seed sampling, IFT delineation with the
// saliency-aware path cost, medoid seed recomputation and the scale schedule.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <queue>
#include <utility>
#include <vector>

#include "core.hpp"

namespace itself {

struct PixelCoord {
    int x = 0;
    int y = 0;
    friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

struct SeedSet {
    std::vector<PixelCoord> seeds;
    std::vector<bool> object_flags;

    std::size_t size() const { return seeds.size(); }
    std::size_t object_count() const {
        return std::size_t(std::count(object_flags.begin(), object_flags.end(), true));
    }
};

struct OisfParams {
    int n = 200;
    double alpha = 0.8;
    double beta = 12.0;
    double gamma = 2.0;
    int inner_iters = 3;
    double kappa = 1.0;
    // Object seeds: absolute count, or a fraction of n when `object_as_fraction` is set.
    double n_object = 3.0;
    bool object_as_fraction = false;

    int object_seed_count() const {
        const int k = object_as_fraction ? static_cast<int>(std::ceil(n * n_object)) : static_cast<int>(n_object);
        return std::clamp(k, 0, n);
    }

    void validate() const {
        if (n < 1) throw InvalidArgument("oisf: n must be >= 1");
        if (!(kappa > 0.0 && kappa <= 1.0)) throw InvalidArgument("oisf: kappa must be in (0,1]");
        if (inner_iters < 1) throw InvalidArgument("oisf: inner_iters must be >= 1");
        if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) throw InvalidArgument("oisf: alpha, beta, gamma must be >= 0");
        if (n_object < 0.0) throw InvalidArgument("oisf: n_object must be >= 0");
    }
};

struct ForestState {
    std::vector<double> cost;
    std::vector<int> root;         // pixel index of the tree's seed
    std::vector<int> label;        // seed index
    std::vector<int> predecessor;  // -1 at roots
};

struct Superpixel {
    std::size_t size = 0;
    Lab mean_lab{0.0, 0.0, 0.0};
    Lab mean_normalized{0.0, 0.0, 0.0};
    std::vector<std::pair<int, double>> histogram;  // (palette index, p(c,S)), sorted by index
    std::vector<int> boundary_pixels;
    double cx = 0.0;
    double cy = 0.0;
    bool touches_border = false;
};

struct SuperpixelSegmentation {
    LabelMap label_map;
    std::vector<Superpixel> superpixels;
    ForestState forest;  // empty when the segmentation was not produced by delineation

    int count() const { return label_map.count; }
    int width() const { return label_map.width; }
    int height() const { return label_map.height; }
};

namespace detail {

constexpr std::array<std::pair<int, int>, 8> kNeighbors8{
    {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}}};
constexpr std::array<std::pair<int, int>, 4> kNeighbors4{{{0, -1}, {-1, 0}, {1, 0}, {0, 1}}};

inline double lab_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
    return std::sqrt(s);
}

}  // namespace detail

/// Builds per-superpixel statistics. Histograms are filled only when a palette is given.
inline SuperpixelSegmentation describe_segmentation(LabelMap labels, const LabImage& image,
                                                    const QuantizedPalette* palette = nullptr) {
    if (labels.width != image.width || labels.height != image.height)
        throw InvalidArgument("describe_segmentation: dimension mismatch");
    SuperpixelSegmentation seg;
    seg.label_map = std::move(labels);
    const LabelMap& lm = seg.label_map;
    const int w = lm.width, h = lm.height, ch = image.channels;
    seg.superpixels.assign(std::size_t(lm.count), Superpixel{});

    std::vector<std::map<int, std::size_t>> hist;
    if (palette) hist.resize(std::size_t(lm.count));

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t p = std::size_t(y) * w + x;
            const int l = lm.labels[p];
            Superpixel& sp = seg.superpixels[std::size_t(l)];
            ++sp.size;
            sp.cx += x;
            sp.cy += y;
            for (int c = 0; c < ch; ++c) {
                sp.mean_lab[std::size_t(c)] += image.data[p * std::size_t(ch) + std::size_t(c)];
                sp.mean_normalized[std::size_t(c)] += image.normalized[p * std::size_t(ch) + std::size_t(c)];
            }
            if (x == 0 || y == 0 || x == w - 1 || y == h - 1) sp.touches_border = true;
            bool boundary = false;
            for (auto [dx, dy] : detail::kNeighbors8) {
                const int qx = x + dx, qy = y + dy;
                if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
                if (lm.labels[std::size_t(qy) * w + qx] != l) {
                    boundary = true;
                    break;
                }
            }
            if (boundary) sp.boundary_pixels.push_back(static_cast<int>(p));
            if (palette) ++hist[std::size_t(l)][palette->pixel_to_color[p]];
        }
    }
    for (std::size_t i = 0; i < seg.superpixels.size(); ++i) {
        Superpixel& sp = seg.superpixels[i];
        if (sp.size == 0) continue;
        const double n = double(sp.size);
        sp.cx /= n;
        sp.cy /= n;
        for (int c = 0; c < ch; ++c) {
            sp.mean_lab[std::size_t(c)] /= n;
            sp.mean_normalized[std::size_t(c)] /= n;
        }
        if (palette) {
            sp.histogram.reserve(hist[i].size());
            for (auto [color, cnt] : hist[i]) sp.histogram.emplace_back(color, double(cnt) / n);
        }
    }
    return seg;
}

// ---------------------------------------------------------------------------
// OSMOX seed sampling

/// Radius of the priority penalty applied around each selected seed.
/// This is the grid step sqrt(|P|/n): with it, greedy selection on a flat
/// priority surface tiles the whole region instead of its first rows.
inline double osmox_radius(std::size_t pixels, int n) {
    return std::sqrt(double(pixels) / double(std::max(n, 1)));
}

namespace detail {

inline std::vector<double> neighborhood_mean(const SaliencyMap& map, bool inverted) {
    const int w = map.width, h = map.height;
    std::vector<double> out(map.pixel_count());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            int cnt = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int qx = x + dx, qy = y + dy;
                    if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
                    const double v = map(qx, qy);
                    s += inverted ? 1.0 - v : v;
                    ++cnt;
                }
            }
            out[std::size_t(y) * w + x] = s / cnt;
        }
    }
    return out;
}

struct OsmoxState {
    int width, height;
    double radius;
    std::vector<double> priority;
    std::vector<char>& taken;

    void penalize(PixelCoord s) {
        const int r = static_cast<int>(std::ceil(radius));
        const double r2 = radius * radius;
        for (int y = std::max(0, s.y - r); y <= std::min(height - 1, s.y + r); ++y) {
            for (int x = std::max(0, s.x - r); x <= std::min(width - 1, s.x + r); ++x) {
                const double d2 = double(x - s.x) * (x - s.x) + double(y - s.y) * (y - s.y);
                if (d2 >= r2) continue;
                priority[std::size_t(y) * width + x] *= 1.0 - std::exp(-d2 / r2);
            }
        }
    }

    // Greedy ordered extraction; equal priorities resolve in raster order.
    std::vector<PixelCoord> extract(int count) {
        using Entry = std::pair<double, long>;  // (priority, -index)
        std::priority_queue<Entry> heap;
        for (std::size_t p = 0; p < priority.size(); ++p)
            if (!taken[p]) heap.emplace(priority[p], -long(p));
        std::vector<PixelCoord> out;
        while (int(out.size()) < count && !heap.empty()) {
            const auto [prio, neg] = heap.top();
            heap.pop();
            const std::size_t p = std::size_t(-neg);
            if (taken[p] || prio != priority[p]) continue;
            taken[p] = 1;
            const PixelCoord c{int(p % std::size_t(width)), int(p / std::size_t(width))};
            out.push_back(c);
            const int r = static_cast<int>(std::ceil(radius));
            penalize(c);
            for (int y = std::max(0, c.y - r); y <= std::min(height - 1, c.y + r); ++y)
                for (int x = std::max(0, c.x - r); x <= std::min(width - 1, c.x + r); ++x) {
                    const std::size_t q = std::size_t(y) * width + x;
                    if (!taken[q]) heap.emplace(priority[q], -long(q));
                }
        }
        return out;
    }
};

}  // namespace detail

/// Object seeds are drawn from the neighborhood-mean saliency, background seeds
/// from the inverted map; both phases share one penalty field.
inline SeedSet osmox_sample(const SaliencyMap& object_map, int n, int n_object) {
    const std::size_t pixels = object_map.pixel_count();
    if (n < 1) throw InvalidArgument("osmox_sample: n must be >= 1");
    if (std::size_t(n) > pixels) throw InvalidArgument("osmox_sample: more seeds than pixels");
    if (n_object < 0 || n_object > n) throw InvalidArgument("osmox_sample: n_object must lie in [0, n]");

    const double radius = osmox_radius(pixels, n);
    std::vector<char> taken(pixels, 0);
    SeedSet out;

    detail::OsmoxState obj{object_map.width, object_map.height, radius, detail::neighborhood_mean(object_map, false),
                           taken};
    for (const PixelCoord& s : obj.extract(n_object)) {
        out.seeds.push_back(s);
        out.object_flags.push_back(true);
    }

    detail::OsmoxState bg{object_map.width, object_map.height, radius, detail::neighborhood_mean(object_map, true),
                          taken};
    for (const PixelCoord& s : out.seeds) bg.penalize(s);
    for (const PixelCoord& s : bg.extract(n - n_object)) {
        out.seeds.push_back(s);
        out.object_flags.push_back(false);
    }
    return out;
}

// ---------------------------------------------------------------------------
// IFT delineation

/// Arc weight of extending a path rooted at r to pixel q:
/// ||q-p|| + [alpha*||I(r)-I(q)||*gamma^|S(r)-S(q)| + gamma*|S(r)-S(q)|]^beta.
/// Color distances are CIE76 differences in raw Lab units.
inline double oisf_arc_weight(double step_length, double color_distance, double saliency_diff,
                              const OisfParams& params) {
    const double base = params.alpha * color_distance * std::pow(params.gamma, saliency_diff) +
                        params.gamma * saliency_diff;
    return step_length + std::pow(base, params.beta);
}

inline SuperpixelSegmentation ift_delineate(const LabImage& image, const SaliencyMap& object_map, const SeedSet& seeds,
                                            const OisfParams& params, const QuantizedPalette* palette = nullptr) {
    if (object_map.width != image.width || object_map.height != image.height)
        throw InvalidArgument("ift_delineate: object map and image dimensions differ");
    if (seeds.seeds.empty()) throw InvalidArgument("ift_delineate: empty seed set");
    const int w = image.width, h = image.height;
    const std::size_t n = image.pixel_count();

    ForestState f;
    f.cost.assign(n, std::numeric_limits<double>::infinity());
    f.root.assign(n, -1);
    f.label.assign(n, -1);
    f.predecessor.assign(n, -1);

    // Min-heap on (cost, insertion order): equal costs leave in FIFO order.
    using Entry = std::pair<double, std::uint64_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    std::vector<std::uint64_t> order(n, 0);
    std::vector<int> pixel_of_order;
    pixel_of_order.reserve(n * 2);
    std::uint64_t counter = 0;
    auto push = [&](std::size_t p) {
        order[p] = counter++;
        pixel_of_order.push_back(static_cast<int>(p));
        heap.emplace(f.cost[p], order[p]);
    };

    for (std::size_t i = 0; i < seeds.seeds.size(); ++i) {
        const PixelCoord s = seeds.seeds[i];
        if (s.x < 0 || s.y < 0 || s.x >= w || s.y >= h) throw InvalidArgument("ift_delineate: seed out of bounds");
        const std::size_t p = image.index(s.x, s.y);
        if (f.label[p] != -1) throw InvalidArgument("ift_delineate: duplicate seed coordinates");
        f.cost[p] = 0.0;
        f.root[p] = static_cast<int>(p);
        f.label[p] = static_cast<int>(i);
        push(p);
    }

    std::vector<char> done(n, 0);
    while (!heap.empty()) {
        const auto [c, ord] = heap.top();
        heap.pop();
        const std::size_t p = std::size_t(pixel_of_order[ord]);
        if (done[p] || ord != order[p]) continue;
        done[p] = 1;
        const int px = int(p % std::size_t(w)), py = int(p / std::size_t(w));
        const std::size_t r = std::size_t(f.root[p]);
        const auto root_color = image.raw(r);
        const double root_sal = object_map.values[r];
        for (auto [dx, dy] : detail::kNeighbors8) {
            const int qx = px + dx, qy = py + dy;
            if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
            const std::size_t q = std::size_t(qy) * w + qx;
            if (done[q]) continue;
            const double step = (dx != 0 && dy != 0) ? std::sqrt(2.0) : 1.0;
            const double cand =
                c + oisf_arc_weight(step, detail::lab_distance(root_color, image.raw(q)),
                                    std::abs(root_sal - object_map.values[q]), params);
            if (cand < f.cost[q]) {
                f.cost[q] = cand;
                f.root[q] = f.root[p];
                f.label[q] = f.label[p];
                f.predecessor[q] = static_cast<int>(p);
                push(q);
            }
        }
    }

    LabelMap lm;
    lm.width = w;
    lm.height = h;
    lm.count = static_cast<int>(seeds.seeds.size());
    lm.labels = f.label;
    SuperpixelSegmentation seg = describe_segmentation(std::move(lm), image, palette);
    seg.forest = std::move(f);
    return seg;
}

/// One seed per superpixel at the member closest (Lab) to the superpixel mean.
inline SeedSet recompute_seeds(const SuperpixelSegmentation& seg, const LabImage& image,
                               const SeedSet* previous = nullptr) {
    const LabelMap& lm = seg.label_map;
    const int ch = image.channels;
    std::vector<double> best(std::size_t(lm.count), std::numeric_limits<double>::infinity());
    std::vector<std::size_t> arg(std::size_t(lm.count), 0);
    for (std::size_t p = 0; p < lm.pixel_count(); ++p) {
        const int l = lm.labels[p];
        const Lab& m = seg.superpixels[std::size_t(l)].mean_lab;
        const double d = detail::lab_distance(image.raw(p), std::span<const double>(m.data(), std::size_t(ch)));
        if (d < best[std::size_t(l)]) {
            best[std::size_t(l)] = d;
            arg[std::size_t(l)] = p;
        }
    }
    SeedSet out;
    for (int l = 0; l < lm.count; ++l) {
        const std::size_t p = arg[std::size_t(l)];
        out.seeds.push_back({int(p % std::size_t(lm.width)), int(p / std::size_t(lm.width))});
        const bool flag = previous && std::size_t(l) < previous->object_flags.size() && previous->object_flags[std::size_t(l)];
        out.object_flags.push_back(flag);
    }
    return out;
}

/// OSMOX sampling followed by `inner_iters` rounds of delineation and seed recomputation.
inline SuperpixelSegmentation oisf_segment(const LabImage& image, const SaliencyMap& object_map,
                                           const OisfParams& params, const QuantizedPalette* palette = nullptr) {
    params.validate();
    if (std::size_t(params.n) > image.pixel_count()) throw InvalidArgument("oisf_segment: n exceeds pixel count");
    SeedSet seeds = osmox_sample(object_map, params.n, params.object_seed_count());
    SuperpixelSegmentation seg;
    for (int it = 0; it < params.inner_iters; ++it) {
        seg = ift_delineate(image, object_map, seeds, params, palette);
        if (it + 1 < params.inner_iters) seeds = recompute_seeds(seg, image, &seeds);
    }
    return seg;
}

/// Superpixel count for the next framework iteration: max(2, round(n*kappa)).
inline int next_scale(int n_current, double kappa) {
    return std::max(2, static_cast<int>(std::lround(double(n_current) * kappa)));
}

}  // namespace itself
