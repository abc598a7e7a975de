#pragma once

// Image representation shared by every stage: Lab rasters, saliency maps,
// label maps and the quantized color palette.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace itself {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// 8-bit raster as decoded from disk, interleaved, 1 (gray) or 3 (RGB) channels.
struct RgbImage {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<std::uint8_t> data;

    RgbImage() = default;
    RgbImage(int w, int h, int c) : width(w), height(h), channels(c), data(std::size_t(w) * h * c, 0) {}

    std::size_t pixel_count() const { return std::size_t(width) * height; }
    std::uint8_t* at(int x, int y) { return data.data() + (std::size_t(y) * width + x) * channels; }
    const std::uint8_t* at(int x, int y) const { return data.data() + (std::size_t(y) * width + x) * channels; }
};

using Lab = std::array<double, 3>;

/// Pixel grid in CIE L*a*b*. `data` holds raw values (L in [0,100], a and b
/// roughly in [-128,127]); `normalized` holds the same channels mapped to [0,1].
/// Grayscale images carry only L (channels == 1).
struct LabImage {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<double> data;
    std::vector<double> normalized;

    std::size_t pixel_count() const { return std::size_t(width) * height; }
    std::size_t index(int x, int y) const { return std::size_t(y) * width + x; }

    std::span<const double> raw(std::size_t p) const { return {data.data() + p * channels, std::size_t(channels)}; }
    std::span<const double> norm(std::size_t p) const {
        return {normalized.data() + p * channels, std::size_t(channels)};
    }
};

/// Per-pixel values in [0,1]. Also used for prior maps and ground truths.
struct SaliencyMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    SaliencyMap() = default;
    SaliencyMap(int w, int h, double fill = 0.0) : width(w), height(h), values(std::size_t(w) * h, fill) {}

    std::size_t pixel_count() const { return std::size_t(width) * height; }
    double& operator()(int x, int y) { return values[std::size_t(y) * width + x]; }
    double operator()(int x, int y) const { return values[std::size_t(y) * width + x]; }
};

/// Superpixel id per pixel, ids contiguous in [0, count).
struct LabelMap {
    int width = 0;
    int height = 0;
    int count = 0;
    std::vector<int> labels;

    std::size_t pixel_count() const { return std::size_t(width) * height; }
    int operator()(int x, int y) const { return labels[std::size_t(y) * width + x]; }
};

/// Checks that every label lies in [0,count) and every id occurs.
inline bool is_valid(const LabelMap& lm) {
    if (lm.labels.size() != lm.pixel_count() || lm.count <= 0) return false;
    std::vector<char> seen(std::size_t(lm.count), 0);
    for (int l : lm.labels) {
        if (l < 0 || l >= lm.count) return false;
        seen[std::size_t(l)] = 1;
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
}

// ---------------------------------------------------------------------------
// sRGB <-> CIE L*a*b* (D65)

namespace detail {

inline double srgb_to_linear(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

inline double linear_to_srgb(double c) {
    return c <= 0.0031308 ? c * 12.92 : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

constexpr double kWhiteX = 0.95047;
constexpr double kWhiteY = 1.0;
constexpr double kWhiteZ = 1.08883;
constexpr double kDelta = 6.0 / 29.0;

inline double lab_f(double t) {
    return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

inline double lab_f_inv(double t) {
    return t > kDelta ? t * t * t : 3.0 * kDelta * kDelta * (t - 4.0 / 29.0);
}

}  // namespace detail

inline Lab linear_rgb_to_lab(double r, double g, double b) {
    const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    const double fx = detail::lab_f(x / detail::kWhiteX);
    const double fy = detail::lab_f(y / detail::kWhiteY);
    const double fz = detail::lab_f(z / detail::kWhiteZ);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

inline Lab srgb8_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return linear_rgb_to_lab(detail::srgb_to_linear(r / 255.0), detail::srgb_to_linear(g / 255.0),
                             detail::srgb_to_linear(b / 255.0));
}

/// L* of an 8-bit gray level (luminance of the linearized value).
inline double gray8_to_lightness(std::uint8_t v) {
    return 116.0 * detail::lab_f(detail::srgb_to_linear(v / 255.0)) - 16.0;
}

/// Inverse conversion, clamped and rounded to 8 bits.
inline std::array<std::uint8_t, 3> lab_to_srgb8(const Lab& lab) {
    const double fy = (lab[0] + 16.0) / 116.0;
    const double fx = fy + lab[1] / 500.0;
    const double fz = fy - lab[2] / 200.0;
    const double x = detail::kWhiteX * detail::lab_f_inv(fx);
    const double y = detail::kWhiteY * detail::lab_f_inv(fy);
    const double z = detail::kWhiteZ * detail::lab_f_inv(fz);
    const double lin[3] = {3.2404542 * x - 1.5371385 * y - 0.4985314 * z,
                           -0.9692660 * x + 1.8760108 * y + 0.0415560 * z,
                           0.0556434 * x - 0.2040259 * y + 1.0572252 * z};
    std::array<std::uint8_t, 3> out{};
    for (int c = 0; c < 3; ++c) {
        const double v = detail::linear_to_srgb(std::clamp(lin[c], 0.0, 1.0)) * 255.0;
        out[std::size_t(c)] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    return out;
}

inline std::uint8_t lightness_to_gray8(double lightness) {
    return lab_to_srgb8({lightness, 0.0, 0.0})[0];
}

/// Maps raw Lab channels to [0,1]: L/100, (a+128)/255, (b+128)/255.
inline double normalize_channel(int channel, double v) {
    const double n = channel == 0 ? v / 100.0 : (v + 128.0) / 255.0;
    return std::clamp(n, 0.0, 1.0);
}

inline LabImage rgb_to_lab(const RgbImage& img) {
    if (img.width <= 0 || img.height <= 0) throw InvalidArgument("rgb_to_lab: zero-sized image");
    if (img.channels != 1 && img.channels != 3) throw InvalidArgument("rgb_to_lab: expected 1 or 3 channels");
    if (img.data.size() != img.pixel_count() * std::size_t(img.channels))
        throw InvalidArgument("rgb_to_lab: buffer size does not match dimensions");

    LabImage out;
    out.width = img.width;
    out.height = img.height;
    out.channels = img.channels;
    const std::size_t n = img.pixel_count();
    out.data.resize(n * std::size_t(out.channels));
    out.normalized.resize(out.data.size());
    for (std::size_t p = 0; p < n; ++p) {
        const std::uint8_t* px = img.data.data() + p * std::size_t(img.channels);
        if (img.channels == 1) {
            out.data[p] = gray8_to_lightness(px[0]);
            out.normalized[p] = normalize_channel(0, out.data[p]);
        } else {
            const Lab lab = srgb8_to_lab(px[0], px[1], px[2]);
            for (int c = 0; c < 3; ++c) {
                out.data[p * 3 + std::size_t(c)] = lab[std::size_t(c)];
                out.normalized[p * 3 + std::size_t(c)] = normalize_channel(c, lab[std::size_t(c)]);
            }
        }
    }
    return out;
}

/// Euclidean distance in normalized Lab divided by sqrt(channels), so it lies in [0,1].
inline double color_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
    return std::sqrt(s / double(a.size()));
}

// ---------------------------------------------------------------------------
// Color quantization

/// Occupied bins of a uniform quantization of the normalized channels.
/// `colors` holds the mean normalized color of each bin's pixels.
struct QuantizedPalette {
    int bins_per_channel = 8;
    int channels = 3;
    std::vector<std::array<double, 3>> colors;
    std::vector<int> pixel_to_color;
    std::vector<double> global_frequency;

    std::size_t size() const { return colors.size(); }
    std::span<const double> color(std::size_t i) const { return {colors[i].data(), std::size_t(channels)}; }
    double distance(std::size_t i, std::size_t j) const { return color_distance(color(i), color(j)); }
};

inline QuantizedPalette quantize(const LabImage& image, int bins_per_channel = 8) {
    if (bins_per_channel < 2) throw InvalidArgument("quantize: bins_per_channel must be >= 2");
    const std::size_t n = image.pixel_count();
    const int ch = image.channels;

    std::vector<long> keys(n);
    for (std::size_t p = 0; p < n; ++p) {
        long key = 0;
        for (int c = 0; c < ch; ++c) {
            const double v = image.normalized[p * std::size_t(ch) + std::size_t(c)];
            const int bin = std::min(bins_per_channel - 1, static_cast<int>(std::floor(v * bins_per_channel)));
            key = key * bins_per_channel + bin;
        }
        keys[p] = key;
    }

    // Palette order follows bin key so results do not depend on scan order.
    std::map<long, int> index_of;
    for (long k : keys) index_of.emplace(k, 0);
    int next = 0;
    for (auto& [k, idx] : index_of) idx = next++;

    QuantizedPalette pal;
    pal.bins_per_channel = bins_per_channel;
    pal.channels = ch;
    pal.colors.assign(index_of.size(), {0.0, 0.0, 0.0});
    pal.global_frequency.assign(index_of.size(), 0.0);
    pal.pixel_to_color.resize(n);
    std::vector<std::size_t> counts(index_of.size(), 0);
    for (std::size_t p = 0; p < n; ++p) {
        const int c = index_of[keys[p]];
        pal.pixel_to_color[p] = c;
        ++counts[std::size_t(c)];
        for (int k = 0; k < ch; ++k)
            pal.colors[std::size_t(c)][std::size_t(k)] += image.normalized[p * std::size_t(ch) + std::size_t(k)];
    }
    for (std::size_t c = 0; c < counts.size(); ++c) {
        for (int k = 0; k < ch; ++k) pal.colors[c][std::size_t(k)] /= double(counts[c]);
        pal.global_frequency[c] = double(counts[c]) / double(n);
    }
    return pal;
}

// ---------------------------------------------------------------------------
// Map utilities

/// Affine rescale to [0,1]; a constant input maps to 0.5 everywhere.
inline std::vector<double> minmax_normalize(std::span<const double> v) {
    std::vector<double> out(v.begin(), v.end());
    if (out.empty()) return out;
    const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
    const double mn = *lo, mx = *hi;
    const double range = mx - mn;
    if (!(range > 0.0) || !std::isfinite(range)) {
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    for (double& x : out) x = std::clamp((x - mn) / range, 0.0, 1.0);
    return out;
}

inline SaliencyMap minmax_normalize(const SaliencyMap& map) {
    SaliencyMap out(map.width, map.height);
    out.values = minmax_normalize(std::span<const double>(map.values));
    return out;
}

inline double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
}

/// Paints each pixel with the score of its superpixel.
inline SaliencyMap rasterize(const LabelMap& lm, std::span<const double> scores) {
    if (scores.size() != std::size_t(lm.count)) throw InvalidArgument("rasterize: score count != label count");
    SaliencyMap out(lm.width, lm.height);
    for (std::size_t p = 0; p < lm.pixel_count(); ++p) out.values[p] = scores[std::size_t(lm.labels[p])];
    return out;
}

/// Mean map value over each superpixel.
inline std::vector<double> superpixel_means(const LabelMap& lm, const SaliencyMap& map) {
    if (map.width != lm.width || map.height != lm.height)
        throw InvalidArgument("superpixel_means: map and label map dimensions differ");
    std::vector<double> sum(std::size_t(lm.count), 0.0);
    std::vector<std::size_t> cnt(std::size_t(lm.count), 0);
    for (std::size_t p = 0; p < lm.pixel_count(); ++p) {
        sum[std::size_t(lm.labels[p])] += map.values[p];
        ++cnt[std::size_t(lm.labels[p])];
    }
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = cnt[i] ? sum[i] / double(cnt[i]) : 0.0;
    return sum;
}

}  // namespace itself
