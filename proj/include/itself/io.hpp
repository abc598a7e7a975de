#pragma once

// Disk I/O on top of OpenCV codecs. Every writer goes through a temporary file
// in the destination directory and renames it into place.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "core.hpp"
#include "metrics.hpp"
#include "priors.hpp"

namespace itself {

class IoError : public Error {
public:
    using Error::Error;
};

namespace fs = std::filesystem;

namespace detail {

inline fs::path temp_sibling(const fs::path& target) {
    static std::atomic<unsigned> counter{0};
    fs::path tmp = target.parent_path() /
                   ("." + target.stem().string() + ".tmp" + std::to_string(counter++) + target.extension().string());
    return tmp;
}

inline void commit(const fs::path& tmp, const fs::path& target) {
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot move output into place: " + target.string());
    }
}

inline void write_mat(const fs::path& path, const cv::Mat& m) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    const fs::path tmp = temp_sibling(path);
    bool ok = false;
    try {
        ok = cv::imwrite(tmp.string(), m);
    } catch (const cv::Exception&) {
        ok = false;
    }
    if (!ok) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw IoError("cannot write image: " + path.string());
    }
    commit(tmp, path);
}

inline cv::Mat read_mat(const fs::path& path, int flags) {
    cv::Mat m;
    try {
        m = cv::imread(path.string(), flags);
    } catch (const cv::Exception&) {
        m.release();
    }
    if (m.empty()) throw IoError("cannot read image: " + path.string());
    return m;
}

inline cv::Mat to_8bit(const cv::Mat& m) {
    if (m.depth() == CV_8U) return m;
    cv::Mat out;
    const double scale = m.depth() == CV_16U ? 1.0 / 257.0 : 1.0;
    m.convertTo(out, CV_8U, scale);
    return out;
}

}  // namespace detail

/// Decodes an image as 8-bit RGB, or single-channel when stored as grayscale.
inline RgbImage read_image(const fs::path& path) {
    cv::Mat m = detail::to_8bit(detail::read_mat(path, cv::IMREAD_ANYCOLOR | cv::IMREAD_ANYDEPTH));
    RgbImage img;
    if (m.channels() == 1) {
        img = RgbImage(m.cols, m.rows, 1);
    } else {
        cv::Mat rgb;
        cv::cvtColor(m, rgb, m.channels() == 4 ? cv::COLOR_BGRA2RGB : cv::COLOR_BGR2RGB);
        m = rgb;
        img = RgbImage(m.cols, m.rows, 3);
    }
    for (int y = 0; y < m.rows; ++y)
        std::copy_n(m.ptr<std::uint8_t>(y), std::size_t(m.cols) * img.channels, img.at(0, y));
    return img;
}

inline std::vector<std::uint8_t> read_gray(const fs::path& path, int& width, int& height) {
    cv::Mat m = detail::to_8bit(detail::read_mat(path, cv::IMREAD_GRAYSCALE | cv::IMREAD_ANYDEPTH));
    width = m.cols;
    height = m.rows;
    std::vector<std::uint8_t> out(std::size_t(m.cols) * m.rows);
    for (int y = 0; y < m.rows; ++y) std::copy_n(m.ptr<std::uint8_t>(y), m.cols, out.data() + std::size_t(y) * m.cols);
    return out;
}

inline BinaryMask read_mask(const fs::path& path) {
    int w = 0, h = 0;
    const auto gray = read_gray(path, w, h);
    return binarize_gt(w, h, gray);
}

inline ScribbleSet read_scribbles(const fs::path& path) {
    int w = 0, h = 0;
    const auto gray = read_gray(path, w, h);
    return ScribbleSet::from_mask(w, h, gray);
}

/// Map values scaled to 0..255 and rounded.
inline cv::Mat to_gray8(const SaliencyMap& map) {
    cv::Mat m(map.height, map.width, CV_8UC1);
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x)
            m.at<std::uint8_t>(y, x) = std::uint8_t(std::lround(std::clamp(map(x, y), 0.0, 1.0) * 255.0));
    return m;
}

inline SaliencyMap read_map(const fs::path& path) {
    int w = 0, h = 0;
    const auto gray = read_gray(path, w, h);
    SaliencyMap m(w, h);
    for (std::size_t p = 0; p < gray.size(); ++p) m.values[p] = gray[p] / 255.0;
    return m;
}

inline void write_map(const fs::path& path, const SaliencyMap& map) { detail::write_mat(path, to_gray8(map)); }

inline void write_heatmap(const fs::path& path, const SaliencyMap& map) {
    cv::Mat color;
    cv::applyColorMap(to_gray8(map), color, cv::COLORMAP_JET);
    detail::write_mat(path, color);
}

inline cv::Mat to_bgr(const RgbImage& img) {
    cv::Mat m(img.height, img.width, img.channels == 1 ? CV_8UC1 : CV_8UC3);
    for (int y = 0; y < img.height; ++y)
        std::copy_n(img.at(0, y), std::size_t(img.width) * img.channels, m.ptr<std::uint8_t>(y));
    cv::Mat bgr;
    cv::cvtColor(m, bgr, img.channels == 1 ? cv::COLOR_GRAY2BGR : cv::COLOR_RGB2BGR);
    return bgr;
}

/// Superpixel borders drawn in green over the image.
inline void write_overlay(const fs::path& path, const RgbImage& img, const LabelMap& lm) {
    cv::Mat bgr = to_bgr(img);
    for (int y = 0; y < lm.height; ++y)
        for (int x = 0; x < lm.width; ++x) {
            const int l = lm(x, y);
            const bool edge = (x + 1 < lm.width && lm(x + 1, y) != l) || (y + 1 < lm.height && lm(x, y + 1) != l);
            if (edge) bgr.at<cv::Vec3b>(y, x) = cv::Vec3b(0, 255, 0);
        }
    detail::write_mat(path, bgr);
}

/// Binary 16-bit PGM (P5, maxval 65535, big-endian samples).
inline void write_labels(const fs::path& path, const LabelMap& lm) {
    if (lm.count > 65536) throw IoError("label count does not fit in 16 bits");
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    const fs::path tmp = detail::temp_sibling(path);
    {
        std::ofstream out(tmp, std::ios::binary);
        out << "P5\n" << lm.width << ' ' << lm.height << "\n65535\n";
        std::vector<char> buf(lm.pixel_count() * 2);
        for (std::size_t p = 0; p < lm.pixel_count(); ++p) {
            buf[2 * p] = char((lm.labels[p] >> 8) & 0xff);
            buf[2 * p + 1] = char(lm.labels[p] & 0xff);
        }
        out.write(buf.data(), std::streamsize(buf.size()));
        if (!out) {
            out.close();
            std::error_code ec;
            fs::remove(tmp, ec);
            throw IoError("cannot write label map: " + path.string());
        }
    }
    detail::commit(tmp, path);
}

inline LabelMap read_labels(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    if (!(in >> magic >> w >> h >> maxval) || magic != "P5" || w <= 0 || h <= 0 || maxval != 65535)
        throw IoError("not a 16-bit PGM label map: " + path.string());
    in.get();
    std::vector<unsigned char> buf(std::size_t(w) * h * 2);
    if (!in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size())))
        throw IoError("truncated label map: " + path.string());
    LabelMap lm;
    lm.width = w;
    lm.height = h;
    lm.labels.resize(std::size_t(w) * h);
    int mx = -1;
    for (std::size_t p = 0; p < lm.labels.size(); ++p) {
        lm.labels[p] = (int(buf[2 * p]) << 8) | int(buf[2 * p + 1]);
        mx = std::max(mx, lm.labels[p]);
    }
    lm.count = mx + 1;
    return lm;
}

}  // namespace itself
