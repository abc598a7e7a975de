#pragma once

// Prior models. Each maps a segmentation (plus auxiliary inputs) to one score
// per superpixel in [0,1]; the pipeline rasterizes them for the automaton.

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "core.hpp"
#include "graph.hpp"
#include "oisf.hpp"

namespace itself {

struct PriorLayer {
    std::string name;
    std::vector<double> scores;
    SaliencyMap raster;
};

using PriorStack = std::vector<PriorLayer>;

inline PriorLayer make_layer(std::string name, std::vector<double> scores, const LabelMap& lm) {
    SaliencyMap raster = rasterize(lm, scores);
    return {std::move(name), std::move(scores), std::move(raster)};
}

// ---------------------------------------------------------------------------
// Center-surround

/// Mean distance of each superpixel's pixels to the center pixel, divided by
/// half the image diagonal.
inline std::vector<double> center_distance(const SuperpixelSegmentation& seg) {
    const LabelMap& lm = seg.label_map;
    const double cx = lm.width / 2, cy = lm.height / 2;
    const double half_diag = 0.5 * std::hypot(double(lm.width), double(lm.height));
    std::vector<double> cd(std::size_t(lm.count), 0.0);
    for (int y = 0; y < lm.height; ++y)
        for (int x = 0; x < lm.width; ++x) cd[std::size_t(lm(x, y))] += std::hypot(x - cx, y - cy);
    for (std::size_t i = 0; i < cd.size(); ++i)
        cd[i] = seg.superpixels[i].size ? cd[i] / double(seg.superpixels[i].size) / half_diag : 0.0;
    return cd;
}

inline std::vector<double> center_prior(const SuperpixelSegmentation& seg, double sigma1) {
    if (!(sigma1 > 0.0)) throw InvalidArgument("center_prior: sigma1 must be > 0");
    std::vector<double> cp = center_distance(seg);
    for (double& v : cp) v = std::exp(-v / (sigma1 * sigma1));
    return cp;
}

// ---------------------------------------------------------------------------
// Global color uniqueness

/// Smoothed uniqueness per palette color: rare colors score high, and each
/// score is averaged with those of similar colors.
inline std::vector<double> smoothed_color_uniqueness(const QuantizedPalette& palette, double sigma2) {
    const std::size_t k = palette.size();
    const double s2 = sigma2 * sigma2;
    std::vector<double> us(k), out(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) us[c] = std::exp(-palette.global_frequency[c] / s2);
    for (std::size_t i = 0; i < k; ++i) {
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double ws = std::exp(-palette.distance(i, j) / s2);
            num += us[j] * ws;
            den += ws;
        }
        out[i] = num / den;
    }
    return out;
}

inline std::vector<double> color_uniqueness_prior(const SuperpixelSegmentation& seg, const QuantizedPalette& palette,
                                                  double sigma2) {
    if (!(sigma2 > 0.0)) throw InvalidArgument("color_uniqueness_prior: sigma2 must be > 0");
    const std::vector<double> usp = smoothed_color_uniqueness(palette, sigma2);
    std::vector<double> gp(std::size_t(seg.count()), 0.0);
    for (std::size_t i = 0; i < gp.size(); ++i) {
        const auto& h = seg.superpixels[i].histogram;
        if (h.empty()) continue;
        double s = 0.0;
        for (auto [c, p] : h) s += p * usp[std::size_t(c)];
        gp[i] = s / double(h.size());
    }
    return minmax_normalize(std::span<const double>(gp));
}

// ---------------------------------------------------------------------------
// Channel-combination color priors

struct ChannelTerm {
    double weight = 0.0;
    double offset = 0.0;
    bool absolute = false;  // use |x - offset| instead of (x - offset)
};

/// Linear/absolute combination of normalized L, a, b channels.
struct ChannelCombination {
    std::string name;
    std::array<ChannelTerm, 3> terms{};
    double bias = 0.0;
    bool suppress_border_regions = false;

    double combine(std::span<const double> color) const {
        double s = bias;
        for (std::size_t c = 0; c < 3; ++c) {
            // Grayscale palettes have no chroma; treat it as neutral.
            const double x = c < color.size() ? color[c] : 128.0 / 255.0;
            const double d = x - terms[c].offset;
            s += terms[c].weight * (terms[c].absolute ? std::abs(d) : d);
        }
        return s;
    }

    static ChannelCombination red_yellow() {
        ChannelCombination c;
        c.name = "red_yellow";
        c.terms[1] = {1.0, 0.0, false};
        c.terms[2] = {1.0, 0.0, false};
        return c;
    }

    static ChannelCombination white() {
        ChannelCombination c;
        c.name = "white";
        c.terms[0] = {1.0, 0.0, false};
        c.terms[1] = {-1.0, 0.5, true};
        c.terms[2] = {-1.0, 0.5, true};
        return c;
    }

    static ChannelCombination black() {
        ChannelCombination c;
        c.name = "black";
        c.bias = 1.0;
        c.terms[0] = {-1.0, 0.0, false};
        c.terms[1] = {-1.0, 0.5, true};
        c.terms[2] = {-1.0, 0.5, true};
        c.suppress_border_regions = true;
        return c;
    }
};

/// Zeroes above-mean superpixels connected (through other above-mean
/// superpixels) to one that touches the image border.
inline void suppress_border_connected(const SuperpixelSegmentation& seg, std::vector<double>& scores) {
    const double mu = mean(std::span<const double>(scores));
    std::vector<std::vector<int>> nb(scores.size());
    for (auto [a, b] : adjacent_pairs(seg.label_map)) {
        nb[std::size_t(a)].push_back(b);
        nb[std::size_t(b)].push_back(a);
    }
    std::vector<char> hit(scores.size(), 0);
    std::deque<int> queue;
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (seg.superpixels[i].touches_border && scores[i] > mu) {
            hit[i] = 1;
            queue.push_back(int(i));
        }
    while (!queue.empty()) {
        const int s = queue.front();
        queue.pop_front();
        for (int r : nb[std::size_t(s)])
            if (!hit[std::size_t(r)] && scores[std::size_t(r)] > mu) {
                hit[std::size_t(r)] = 1;
                queue.push_back(r);
            }
    }
    for (std::size_t i = 0; i < scores.size(); ++i)
        if (hit[i]) scores[i] = 0.0;
}

inline std::vector<double> channel_combination_prior(const SuperpixelSegmentation& seg, const QuantizedPalette& palette,
                                                     const ChannelCombination& combo, double sigma3) {
    if (!(sigma3 > 0.0)) throw InvalidArgument("channel_combination_prior: sigma must be > 0");
    std::vector<double> color_score(palette.size());
    for (std::size_t c = 0; c < palette.size(); ++c)
        color_score[c] = std::exp(combo.combine(palette.color(c)) / (sigma3 * sigma3));
    std::vector<double> rp(std::size_t(seg.count()), 0.0);
    for (std::size_t i = 0; i < rp.size(); ++i)
        for (auto [c, p] : seg.superpixels[i].histogram) rp[i] += p * color_score[std::size_t(c)];
    if (combo.suppress_border_regions) suppress_border_connected(seg, rp);
    return minmax_normalize(std::span<const double>(rp));
}

// ---------------------------------------------------------------------------
// Color saliency from a previous map

inline std::vector<double> saliency_color_prior(const SuperpixelSegmentation& seg, const QuantizedPalette& palette,
                                                const SaliencyMap& previous) {
    if (previous.pixel_count() != palette.pixel_to_color.size())
        throw InvalidArgument("saliency_color_prior: map size does not match the palette");
    std::vector<double> sum(palette.size(), 0.0);
    std::vector<std::size_t> cnt(palette.size(), 0);
    for (std::size_t p = 0; p < previous.pixel_count(); ++p) {
        sum[std::size_t(palette.pixel_to_color[p])] += previous.values[p];
        ++cnt[std::size_t(palette.pixel_to_color[p])];
    }
    for (std::size_t c = 0; c < sum.size(); ++c) sum[c] = cnt[c] ? sum[c] / double(cnt[c]) : 0.0;

    std::vector<double> cs(std::size_t(seg.count()), 0.0);
    for (std::size_t i = 0; i < cs.size(); ++i) {
        const auto& h = seg.superpixels[i].histogram;
        if (h.empty()) continue;
        for (auto [c, p] : h) cs[i] += sum[std::size_t(c)];
        cs[i] /= double(h.size());
    }
    return minmax_normalize(std::span<const double>(cs));
}

// ---------------------------------------------------------------------------
// Focus

/// Largest normalized-Lab distance to a 4-neighbor.
inline std::vector<double> color_gradient(const LabImage& image) {
    const int w = image.width, h = image.height;
    std::vector<double> g(image.pixel_count(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t p = image.index(x, y);
            double m = 0.0;
            for (auto [dx, dy] : detail::kNeighbors4) {
                const int qx = x + dx, qy = y + dy;
                if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
                m = std::max(m, color_distance(image.norm(p), image.norm(image.index(qx, qy))));
            }
            g[p] = m;
        }
    return g;
}

struct OtsuResult {
    int bin = -1;          // last bin of the lower class; -1 when the input is flat
    double threshold = 0;  // value at the upper edge of `bin`
    double bin_width = 0;
};

/// Otsu on a 256-bin histogram spanning [0, max(values)]. Values must be >= 0.
inline OtsuResult otsu_threshold(std::span<const double> values) {
    OtsuResult r;
    double mx = 0.0;
    for (double v : values) mx = std::max(mx, v);
    if (!(mx > 0.0) || values.empty()) return r;
    constexpr int kBins = 256;
    r.bin_width = mx / kBins;
    std::array<double, kBins> hist{};
    for (double v : values) hist[std::size_t(std::min(kBins - 1, int(v / r.bin_width)))] += 1.0;
    const double total = double(values.size());
    double sum_all = 0.0;
    for (int i = 0; i < kBins; ++i) sum_all += i * hist[std::size_t(i)];
    double w0 = 0.0, sum0 = 0.0, best = -1.0;
    for (int t = 0; t < kBins - 1; ++t) {
        w0 += hist[std::size_t(t)];
        sum0 += t * hist[std::size_t(t)];
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            r.bin = t;
        }
    }
    if (r.bin >= 0) r.threshold = (r.bin + 1) * r.bin_width;
    return r;
}

/// Pixels whose gradient falls above the Otsu split.
inline std::vector<char> edge_pixels(const LabImage& image) {
    const std::vector<double> g = color_gradient(image);
    const OtsuResult otsu = otsu_threshold(std::span<const double>(g));
    std::vector<char> edges(g.size(), 0);
    if (otsu.bin < 0) return edges;
    for (std::size_t p = 0; p < g.size(); ++p)
        edges[p] = std::min(255, int(g[p] / otsu.bin_width)) > otsu.bin;
    return edges;
}

/// FS(S) = |P_b & P_e| / |P_b|, then FP = 1 - exp(-FS/sigma4^2). Not rescaled.
inline std::vector<double> focus_prior(const LabImage& image, const SuperpixelSegmentation& seg, double sigma4) {
    if (!(sigma4 > 0.0)) throw InvalidArgument("focus_prior: sigma4 must be > 0");
    const std::vector<char> edges = edge_pixels(image);
    std::vector<double> fp(std::size_t(seg.count()), 0.0);
    for (std::size_t i = 0; i < fp.size(); ++i) {
        const auto& b = seg.superpixels[i].boundary_pixels;
        if (b.empty()) continue;
        std::size_t hits = 0;
        for (int p : b) hits += edges[std::size_t(p)] ? 1 : 0;
        const double fs = double(hits) / double(b.size());
        fp[i] = 1.0 - std::exp(-fs / (sigma4 * sigma4));
    }
    return fp;
}

// ---------------------------------------------------------------------------
// Ellipse matching

struct EllipseFit {
    double cx = 0.0, cy = 0.0;
    double orientation = 0.0;  // radians in [0, pi), major axis vs image y-axis
    double semi_major = 0.0;
    double semi_minor = 0.0;
    std::array<double, 2> focus1{0.0, 0.0};
    std::array<double, 2> focus2{0.0, 0.0};
    bool elliptical = false;

    double anisotropy() const { return semi_minor > 0.0 ? semi_major / semi_minor : 0.0; }
};

/// Moment-matched ellipse: axes from the eigen-decomposition of the member
/// coordinates' covariance, semi-axes 2*sqrt(lambda).
inline EllipseFit fit_ellipse(const SuperpixelSegmentation& seg, int id) {
    if (id < 0 || id >= seg.count()) throw InvalidArgument("fit_ellipse: superpixel id out of range");
    const LabelMap& lm = seg.label_map;
    const Superpixel& sp = seg.superpixels[std::size_t(id)];
    EllipseFit fit;
    fit.cx = sp.cx;
    fit.cy = sp.cy;
    if (sp.size < 5) return fit;

    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (int y = 0; y < lm.height; ++y)
        for (int x = 0; x < lm.width; ++x)
            if (lm(x, y) == id) {
                const double dx = x - sp.cx, dy = y - sp.cy;
                sxx += dx * dx;
                syy += dy * dy;
                sxy += dx * dy;
            }
    const double n = double(sp.size);
    sxx /= n;
    syy /= n;
    sxy /= n;
    const double tr = sxx + syy;
    const double disc = std::sqrt(std::max(0.0, 0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy));
    const double l1 = 0.5 * tr + disc, l2 = 0.5 * tr - disc;
    if (!(l2 > 1e-9)) return fit;

    // Major-axis direction.
    double vx, vy;
    if (std::abs(sxy) > 1e-12) {
        vx = l1 - syy;
        vy = sxy;
    } else if (sxx >= syy) {
        vx = 1.0;
        vy = 0.0;
    } else {
        vx = 0.0;
        vy = 1.0;
    }
    const double norm = std::hypot(vx, vy);
    vx /= norm;
    vy /= norm;
    double theta = std::atan2(vx, vy);
    if (theta < 0.0) theta += std::numbers::pi;
    if (theta >= std::numbers::pi) theta -= std::numbers::pi;

    fit.orientation = theta;
    fit.semi_major = 2.0 * std::sqrt(l1);
    fit.semi_minor = 2.0 * std::sqrt(l2);
    const double c = std::sqrt(std::max(0.0, fit.semi_major * fit.semi_major - fit.semi_minor * fit.semi_minor));
    fit.focus1 = {sp.cx + c * vx, sp.cy + c * vy};
    fit.focus2 = {sp.cx - c * vx, sp.cy - c * vy};
    fit.elliptical = true;
    return fit;
}

/// Fraction of member pixels inside the fitted ellipse (sum of focal distances < 2l).
inline std::vector<double> ellipse_match(const SuperpixelSegmentation& seg) {
    const LabelMap& lm = seg.label_map;
    std::vector<EllipseFit> fits;
    fits.reserve(std::size_t(seg.count()));
    for (int i = 0; i < seg.count(); ++i) fits.push_back(fit_ellipse(seg, i));
    std::vector<double> inside(std::size_t(seg.count()), 0.0);
    for (int y = 0; y < lm.height; ++y)
        for (int x = 0; x < lm.width; ++x) {
            const int l = lm(x, y);
            const EllipseFit& f = fits[std::size_t(l)];
            if (!f.elliptical) continue;
            const double d = std::hypot(x - f.focus1[0], y - f.focus1[1]) + std::hypot(x - f.focus2[0], y - f.focus2[1]);
            if (d < 2.0 * f.semi_major) inside[std::size_t(l)] += 1.0;
        }
    for (std::size_t i = 0; i < inside.size(); ++i)
        if (seg.superpixels[i].size) inside[i] /= double(seg.superpixels[i].size);
    return inside;
}

/// EP = 1 - exp(-EM/sigma5^2); superpixels whose size is outside (s0,s1)
/// take the minimum EP over all superpixels. Normalized to [0,1].
inline std::vector<double> ellipse_prior(const SuperpixelSegmentation& seg, double sigma5, double s0, double s1) {
    if (!(sigma5 > 0.0)) throw InvalidArgument("ellipse_prior: sigma5 must be > 0");
    std::vector<double> ep = ellipse_match(seg);
    for (double& v : ep) v = 1.0 - std::exp(-v / (sigma5 * sigma5));
    const double lowest = ep.empty() ? 0.0 : *std::min_element(ep.begin(), ep.end());
    for (std::size_t i = 0; i < ep.size(); ++i) {
        const double size = double(seg.superpixels[i].size);
        if (!(size > s0 && size < s1)) ep[i] = lowest;
    }
    return minmax_normalize(std::span<const double>(ep));
}

// ---------------------------------------------------------------------------
// Scribbles

struct ScribbleSet {
    int width = 0;
    int height = 0;
    std::vector<PixelCoord> object;
    std::vector<PixelCoord> background;

    bool empty() const { return object.empty() && background.empty(); }

    /// Mask codes: 0 unlabeled, 1 background, 2 object.
    static ScribbleSet from_mask(int w, int h, std::span<const std::uint8_t> mask) {
        if (mask.size() != std::size_t(w) * h) throw InvalidArgument("scribble mask size mismatch");
        ScribbleSet s;
        s.width = w;
        s.height = h;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::uint8_t v = mask[std::size_t(y) * w + x];
                if (v == 1) s.background.push_back({x, y});
                else if (v == 2) s.object.push_back({x, y});
            }
        return s;
    }
};

namespace detail {

// 1-D squared distance transform of a sampled function (lower envelope of
// parabolas). Unmarked samples carry kFar instead of infinity.
constexpr double kFar = 1e20;

inline void sq_dt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    v.assign(std::size_t(n), 0);
    z.assign(std::size_t(n) + 1, 0.0);
    auto cross = [&](int q, int p) { return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p); };
    int k = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        double s = cross(q, v[std::size_t(k)]);
        while (s <= z[std::size_t(k)]) {
            --k;
            s = cross(q, v[std::size_t(k)]);
        }
        ++k;
        v[std::size_t(k)] = q;
        z[std::size_t(k)] = s;
        z[std::size_t(k) + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[std::size_t(k) + 1] < q) ++k;
        const int p = v[std::size_t(k)];
        d[q] = double(q - p) * (q - p) + f[p];
    }
}

}  // namespace detail

/// Exact squared Euclidean distance to the nearest marked pixel (infinity if none).
inline std::vector<double> squared_distance_transform(int w, int h, const std::vector<char>& marked) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> grid(std::size_t(w) * h);
    for (std::size_t p = 0; p < grid.size(); ++p) grid[p] = marked[p] ? 0.0 : detail::kFar;
    std::vector<int> v;
    std::vector<double> z;
    std::vector<double> f(std::size_t(std::max(w, h))), d(f.size());
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) f[std::size_t(y)] = grid[std::size_t(y) * w + x];
        detail::sq_dt_1d(f.data(), d.data(), h, v, z);
        for (int y = 0; y < h; ++y) grid[std::size_t(y) * w + x] = d[std::size_t(y)];
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) f[std::size_t(x)] = grid[std::size_t(y) * w + x];
        detail::sq_dt_1d(f.data(), d.data(), w, v, z);
        for (int x = 0; x < w; ++x) grid[std::size_t(y) * w + x] = d[std::size_t(x)];
    }
    for (double& g : grid)
        if (g >= detail::kFar * 0.5) g = kInf;
    return grid;
}

/// Pixel-level location prior: near object scribbles and away from background ones.
inline SaliencyMap scribble_prior(int width, int height, const ScribbleSet& scribbles, double sigma) {
    if (scribbles.empty()) throw InvalidArgument("scribble_prior: no scribbles");
    if (!(sigma > 0.0)) throw InvalidArgument("scribble_prior: sigma must be > 0");
    const std::size_t n = std::size_t(width) * height;
    const double diag2 = double(width) * width + double(height) * height;
    const double s2 = sigma * sigma;

    auto dt = [&](const std::vector<PixelCoord>& pts) {
        std::vector<char> marked(n, 0);
        for (const PixelCoord& c : pts) {
            if (c.x < 0 || c.y < 0 || c.x >= width || c.y >= height)
                throw InvalidArgument("scribble_prior: scribble outside the image");
            marked[std::size_t(c.y) * width + c.x] = 1;
        }
        return squared_distance_transform(width, height, marked);
    };

    SaliencyMap out(width, height, 1.0);
    if (!scribbles.object.empty()) {
        const auto d = dt(scribbles.object);
        for (std::size_t p = 0; p < n; ++p) out.values[p] = std::exp(-(d[p] / diag2) / s2);
    }
    if (!scribbles.background.empty()) {
        const auto d = dt(scribbles.background);
        for (std::size_t p = 0; p < n; ++p) out.values[p] *= 1.0 - std::exp(-(d[p] / diag2) / s2);
    }
    return minmax_normalize(out);
}

}  // namespace itself
