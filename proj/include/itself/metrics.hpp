#pragma once

// Evaluation of saliency maps against binary ground truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "core.hpp"
#include "priors.hpp"

namespace itself {

/// Binary mask, one byte per pixel (0 or 1).
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values;

    BinaryMask() = default;
    BinaryMask(int w, int h) : width(w), height(h), values(std::size_t(w) * h, 0) {}
    std::size_t pixel_count() const { return std::size_t(width) * height; }
    std::uint8_t operator()(int x, int y) const { return values[std::size_t(y) * width + x]; }
};

/// Ground truth from 8-bit gray levels: foreground iff value >= 128.
inline BinaryMask binarize_gt(int w, int h, std::span<const std::uint8_t> gray) {
    if (gray.size() != std::size_t(w) * h) throw InvalidArgument("binarize_gt: size mismatch");
    BinaryMask m(w, h);
    for (std::size_t p = 0; p < gray.size(); ++p) m.values[p] = gray[p] >= 128 ? 1 : 0;
    return m;
}

inline SaliencyMap to_map(const BinaryMask& m) {
    SaliencyMap out(m.width, m.height);
    for (std::size_t p = 0; p < m.pixel_count(); ++p) out.values[p] = m.values[p];
    return out;
}

namespace detail {
inline void check_same(const SaliencyMap& map, const BinaryMask& gt, const char* who) {
    if (map.width != gt.width || map.height != gt.height) throw InvalidArgument(std::string(who) + ": dimensions differ");
}
}  // namespace detail

inline double mae(const SaliencyMap& map, const BinaryMask& gt) {
    detail::check_same(map, gt, "mae");
    if (map.pixel_count() == 0) return 0.0;
    double s = 0.0;
    for (std::size_t p = 0; p < map.pixel_count(); ++p) s += std::abs(map.values[p] - double(gt.values[p]));
    return s / double(map.pixel_count());
}

struct WeightedPrf {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
    bool empty_foreground = false;
};

constexpr double kWfSigma2 = 5.0;
constexpr int kWfRadius = 20;  // exp(-20^2 / 10) is below 1e-17

/// Weighted precision/recall/F. Foreground errors are compared against their
/// Gaussian-smoothed version over foreground neighbors (row-normalized over
/// the foreground), background errors grow with distance to the object.
inline WeightedPrf weighted_prf(const SaliencyMap& map, const BinaryMask& gt) {
    detail::check_same(map, gt, "weighted_prf");
    const int w = gt.width, h = gt.height;
    const std::size_t n = gt.pixel_count();
    std::vector<double> e(n);
    std::vector<char> fg(n);
    bool any_fg = false;
    for (std::size_t p = 0; p < n; ++p) {
        e[p] = std::abs(double(gt.values[p]) - std::clamp(map.values[p], 0.0, 1.0));
        fg[p] = gt.values[p] != 0;
        any_fg |= fg[p] != 0;
    }

    std::vector<double> kernel(2 * kWfRadius + 1);
    for (int d = -kWfRadius; d <= kWfRadius; ++d) kernel[std::size_t(d + kWfRadius)] = std::exp(-double(d) * d / (2.0 * kWfSigma2));

    // Separable sums of kernel*E and kernel*1 over foreground pixels.
    std::vector<double> num_row(n, 0.0), den_row(n, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double sn = 0.0, sd = 0.0;
            for (int d = std::max(-kWfRadius, -x); d <= std::min(kWfRadius, w - 1 - x); ++d) {
                const std::size_t q = std::size_t(y) * w + x + d;
                if (!fg[q]) continue;
                const double k = kernel[std::size_t(d + kWfRadius)];
                sn += k * e[q];
                sd += k;
            }
            num_row[std::size_t(y) * w + x] = sn;
            den_row[std::size_t(y) * w + x] = sd;
        }

    std::vector<double> ew(n, 0.0);
    const std::vector<double> dist2 = any_fg ? squared_distance_transform(w, h, fg) : std::vector<double>();
    const double alpha = std::log(0.5) / 5.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t p = std::size_t(y) * w + x;
            if (fg[p]) {
                double sn = 0.0, sd = 0.0;
                for (int d = std::max(-kWfRadius, -y); d <= std::min(kWfRadius, h - 1 - y); ++d) {
                    const std::size_t q = p + std::ptrdiff_t(d) * w;
                    const double k = kernel[std::size_t(d + kWfRadius)];
                    sn += k * num_row[q];
                    sd += k * den_row[q];
                }
                ew[p] = std::min(e[p], sn / sd);
            } else {
                const double b = any_fg ? 2.0 - std::exp(alpha * std::sqrt(dist2[p])) : 2.0;
                ew[p] = e[p] * b;
            }
        }

    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
        if (fg[p]) {
            tp += 1.0 - ew[p];
            fn += ew[p];
        } else {
            fp += ew[p];
        }
    }
    WeightedPrf r;
    r.empty_foreground = !any_fg;
    r.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    r.recall = any_fg && tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
    r.f = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

/// mask = map > mean(map).
inline BinaryMask threshold_by_mean(const SaliencyMap& map) {
    const double mu = mean(std::span<const double>(map.values));
    BinaryMask m(map.width, map.height);
    for (std::size_t p = 0; p < map.pixel_count(); ++p) m.values[p] = map.values[p] > mu ? 1 : 0;
    return m;
}

enum class ToleranceNorm { Chebyshev, Euclidean };

/// Foreground pixels with a 4-neighbor in the background.
inline std::vector<char> mask_boundary(const BinaryMask& m) {
    const int w = m.width, h = m.height;
    std::vector<char> b(m.pixel_count(), 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!m(x, y)) continue;
            for (auto [dx, dy] : detail::kNeighbors4) {
                const int qx = x + dx, qy = y + dy;
                if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
                if (!m(qx, qy)) {
                    b[std::size_t(y) * w + x] = 1;
                    break;
                }
            }
        }
    return b;
}

/// Fraction of gt boundary pixels with a predicted boundary pixel within `tolerance`.
/// A ground truth without boundary pixels has recall 1.
inline double boundary_recall(const BinaryMask& pred, const BinaryMask& gt, int tolerance = 2,
                              ToleranceNorm norm = ToleranceNorm::Chebyshev) {
    if (pred.width != gt.width || pred.height != gt.height) throw InvalidArgument("boundary_recall: dimensions differ");
    if (tolerance < 0) throw InvalidArgument("boundary_recall: tolerance must be >= 0");
    const int w = gt.width, h = gt.height;
    const std::vector<char> bp = mask_boundary(pred), bg = mask_boundary(gt);
    std::size_t total = 0, hit = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!bg[std::size_t(y) * w + x]) continue;
            ++total;
            bool found = false;
            for (int dy = -tolerance; dy <= tolerance && !found; ++dy)
                for (int dx = -tolerance; dx <= tolerance && !found; ++dx) {
                    if (norm == ToleranceNorm::Euclidean && dx * dx + dy * dy > tolerance * tolerance) continue;
                    const int qx = x + dx, qy = y + dy;
                    if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
                    found = bp[std::size_t(qy) * w + qx] != 0;
                }
            hit += found ? 1 : 0;
        }
    return total ? double(hit) / double(total) : 1.0;
}

struct MetricReport {
    std::string filename;
    double wf = 0.0;
    double w_precision = 0.0;
    double w_recall = 0.0;
    double mae = 0.0;
    double boundary_recall = 0.0;
    bool empty_foreground = false;
};

inline MetricReport evaluate(const SaliencyMap& map, const BinaryMask& gt, std::string filename = {}) {
    MetricReport r;
    r.filename = std::move(filename);
    const WeightedPrf prf = weighted_prf(map, gt);
    r.wf = prf.f;
    r.w_precision = prf.precision;
    r.w_recall = prf.recall;
    r.empty_foreground = prf.empty_foreground;
    r.mae = mae(map, gt);
    r.boundary_recall = boundary_recall(threshold_by_mean(map), gt);
    return r;
}

inline MetricReport aggregate(const std::vector<MetricReport>& rows) {
    MetricReport m;
    m.filename = "mean";
    if (rows.empty()) return m;
    for (const MetricReport& r : rows) {
        m.wf += r.wf;
        m.w_precision += r.w_precision;
        m.w_recall += r.w_recall;
        m.mae += r.mae;
        m.boundary_recall += r.boundary_recall;
    }
    const double k = double(rows.size());
    m.wf /= k;
    m.w_precision /= k;
    m.w_recall /= k;
    m.mae /= k;
    m.boundary_recall /= k;
    return m;
}

inline void write_csv(std::ostream& os, const std::vector<MetricReport>& rows) {
    os << "filename,wf,w_precision,w_recall,mae,boundary_recall\n";
    auto line = [&](const MetricReport& r) {
        char buf[256];
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f,%.6f\n", r.wf, r.w_precision, r.w_recall, r.mae,
                      r.boundary_recall);
        os << r.filename << buf;
    };
    for (const MetricReport& r : rows) line(r);
    line(aggregate(rows));
}

}  // namespace itself
