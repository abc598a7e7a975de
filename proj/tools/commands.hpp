#pragma once

// Subcommand bodies. Each returns the process exit code:
//   0 success, 1 unreadable input, 2 invalid configuration, 3 pipeline failure.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <itself/io.hpp>
#include <itself/itself.hpp>

namespace itself::cli {

enum Exit : int { kOk = 0, kBadInput = 1, kBadConfig = 2, kFailed = 3 };

struct ConfigSource {
    std::string preset;  // empty: built-in defaults
    std::string path;    // empty: no file
};

class InputError : public Error {
public:
    using Error::Error;
};

inline PipelineConfig load_config(const ConfigSource& src) {
    PipelineConfig base = src.preset.empty() ? PipelineConfig{} : preset(src.preset);
    if (src.path.empty()) {
        base.validate();
        return base;
    }
    std::ifstream in(src.path);
    if (!in) throw InputError("cannot read config file: " + src.path);
    return parse_config(in, base);
}

inline bool is_image_file(const fs::path& p) {
    static const std::vector<std::string> exts{".png", ".jpg", ".jpeg", ".bmp", ".pgm", ".ppm", ".tif", ".tiff"};
    std::string e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    return std::find(exts.begin(), exts.end(), e) != exts.end();
}

inline std::vector<fs::path> list_images(const fs::path& dir) {
    std::vector<fs::path> out;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) return out;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && is_image_file(entry.path()) && entry.path().filename().string()[0] != '.')
            out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    return out;
}

/// First image in `dir` whose stem equals `stem`.
inline std::optional<fs::path> find_by_stem(const fs::path& dir, const std::string& stem) {
    for (const fs::path& p : list_images(dir))
        if (p.stem().string() == stem) return p;
    return std::nullopt;
}

inline int worker_count(int requested) {
    int k = std::max(1, requested);
    if (const char* env = std::getenv("ITSELF_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) k = std::min(k, cap);
    }
    return k;
}

// ---------------------------------------------------------------------------

struct SaliencyArgs {
    std::string image;
    ConfigSource config;
    std::string scribbles;
    std::string out;
    std::string trace;
};

inline void write_trace(const fs::path& dir, const RgbImage& rgb, const RunTrace& trace) {
    write_map(dir / "seed_map.png", trace.seed_map);
    for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
        const IterationTrace& it = trace.iterations[i];
        char prefix[32];
        std::snprintf(prefix, sizeof prefix, "iter_%02zu_", i + 1);
        write_map(dir / (std::string(prefix) + "saliency.png"), it.saliency);
        write_overlay(dir / (std::string(prefix) + "superpixels.png"), rgb, it.segmentation.label_map);
        write_heatmap(dir / (std::string(prefix) + "prior.png"), it.prior_map);
        for (const PriorLayer& l : it.priors) write_heatmap(dir / (std::string(prefix) + "prior_" + l.name + ".png"), l.raster);
    }
    write_map(dir / "final.png", trace.final_map);
}

inline int cmd_saliency(const SaliencyArgs& a, std::ostream& err = std::cerr) {
    RgbImage rgb;
    std::optional<ScribbleSet> scribbles;
    PipelineConfig cfg;
    try {
        cfg = load_config(a.config);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kBadConfig;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kBadInput;
    }
    try {
        rgb = read_image(a.image);
        if (!a.scribbles.empty()) scribbles = read_scribbles(a.scribbles);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kBadInput;
    }
    try {
        const LabImage lab = rgb_to_lab(rgb);
        const RunTrace trace = run(lab, cfg, scribbles ? &*scribbles : nullptr);
        write_map(a.out, trace.final_map);
        if (!a.trace.empty()) write_trace(a.trace, rgb, trace);
    } catch (const std::exception& e) {
        err << "error: " << a.image << ": " << e.what() << "\n";
        return kFailed;
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct BatchArgs {
    std::string images;
    std::string scribbles;  // optional directory, same stems
    ConfigSource config;
    std::string out;
    int jobs = 1;
};

inline int cmd_batch(const BatchArgs& a, std::ostream& log = std::cerr) {
    PipelineConfig cfg;
    try {
        cfg = load_config(a.config);
    } catch (const ConfigError& e) {
        log << "error: " << e.what() << "\n";
        return kBadConfig;
    } catch (const InputError& e) {
        log << "error: " << e.what() << "\n";
        return kBadInput;
    }
    const std::vector<fs::path> images = list_images(a.images);
    if (images.empty()) {
        log << "error: no images in " << a.images << "\n";
        return kBadInput;
    }

    std::vector<std::string> messages(images.size());
    std::vector<char> failed(images.size(), 0);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < images.size(); i = next++) {
            const fs::path& img = images[i];
            try {
                const RgbImage rgb = read_image(img);
                std::optional<ScribbleSet> scr;
                if (!a.scribbles.empty())
                    if (auto s = find_by_stem(a.scribbles, img.stem().string())) scr = read_scribbles(*s);
                const RunTrace trace = run(rgb_to_lab(rgb), cfg, scr ? &*scr : nullptr);
                write_map(fs::path(a.out) / (img.stem().string() + ".png"), trace.final_map);
            } catch (const std::exception& e) {
                failed[i] = 1;
                messages[i] = img.filename().string() + ": " + e.what();
            }
        }
    };
    const int k = std::min<int>(worker_count(a.jobs), int(images.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < k; ++t) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    bool any = false;
    for (std::size_t i = 0; i < images.size(); ++i)
        if (failed[i]) {
            log << "error: " << messages[i] << "\n";
            any = true;
        }
    return any ? kFailed : kOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
    std::string maps;
    std::string gt;
    std::string out;  // CSV path; empty writes to stdout
};

inline int cmd_evaluate(const EvaluateArgs& a, std::ostream& err = std::cerr, std::ostream& stdout_ = std::cout) {
    const std::vector<fs::path> maps = list_images(a.maps);
    if (maps.empty()) {
        err << "error: no saliency maps in " << a.maps << "\n";
        return kBadInput;
    }
    std::vector<MetricReport> rows;
    try {
        for (const fs::path& m : maps) {
            const auto gt_path = find_by_stem(a.gt, m.stem().string());
            if (!gt_path) {
                err << "warning: no ground truth for " << m.filename().string() << "\n";
                continue;
            }
            const SaliencyMap map = read_map(m);
            const BinaryMask gt = read_mask(*gt_path);
            if (gt.width != map.width || gt.height != map.height) {
                err << "warning: size mismatch for " << m.filename().string() << "\n";
                continue;
            }
            MetricReport r = evaluate(map, gt, m.filename().string());
            if (r.empty_foreground) err << "warning: empty ground truth for " << r.filename << "\n";
            rows.push_back(std::move(r));
        }
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kBadInput;
    }
    if (rows.empty()) {
        err << "error: no map has a matching ground truth\n";
        return kBadInput;
    }
    std::ostringstream csv;
    write_csv(csv, rows);
    if (a.out.empty()) {
        stdout_ << csv.str();
        return kOk;
    }
    try {
        const fs::path out(a.out);
        if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
        const fs::path tmp = detail::temp_sibling(out);
        {
            std::ofstream f(tmp);
            f << csv.str();
            if (!f) throw IoError("cannot write " + a.out);
        }
        detail::commit(tmp, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailed;
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct SuperpixelArgs {
    std::string image;
    ConfigSource config;
    std::optional<int> n;  // overrides the configured count; 1 is allowed here
    std::string out;       // directory
};

inline int cmd_superpixels(const SuperpixelArgs& a, std::ostream& err = std::cerr) {
    PipelineConfig cfg;
    try {
        cfg = load_config(a.config);
        if (a.n) {
            if (*a.n < 1) throw ConfigError("n", "must be >= 1");
            cfg.oisf.n = *a.n;
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kBadConfig;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kBadInput;
    }
    RgbImage rgb;
    try {
        rgb = read_image(a.image);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kBadInput;
    }
    try {
        const LabImage lab = rgb_to_lab(rgb);
        OisfParams p = cfg.oisf;
        p.n = std::min<int>(p.n, int(lab.pixel_count()));
        const SuperpixelSegmentation seg = oisf_segment(lab, SaliencyMap(lab.width, lab.height, 0.5), p);
        const std::string stem = fs::path(a.image).stem().string();
        write_labels(fs::path(a.out) / (stem + "_labels.pgm"), seg.label_map);
        write_overlay(fs::path(a.out) / (stem + "_overlay.png"), rgb, seg.label_map);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailed;
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct PriorArgs {
    std::string image;
    ConfigSource config;
    std::string scribbles;
    std::string out;  // directory
};

/// Heat maps of every enabled prior on the first-iteration segmentation.
inline int cmd_priors(const PriorArgs& a, std::ostream& err = std::cerr) {
    PipelineConfig cfg;
    try {
        cfg = load_config(a.config);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kBadConfig;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kBadInput;
    }
    RgbImage rgb;
    std::optional<ScribbleSet> scribbles;
    try {
        rgb = read_image(a.image);
        if (!a.scribbles.empty()) scribbles = read_scribbles(a.scribbles);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kBadInput;
    }
    try {
        const LabImage lab = rgb_to_lab(rgb);
        const QuantizedPalette palette = quantize(lab);
        OisfParams p = cfg.oisf;
        p.n = std::min<int>(p.n, int(lab.pixel_count()));
        const SuperpixelSegmentation seg = oisf_segment(lab, SaliencyMap(lab.width, lab.height, 0.5), p, &palette);
        const PriorStack stack = compute_priors(lab, seg, palette, cfg, nullptr, scribbles ? &*scribbles : nullptr);
        if (stack.empty()) {
            err << "error: no prior enabled in the configuration\n";
            return kBadConfig;
        }
        std::vector<SaliencyMap> rasters;
        for (const PriorLayer& l : stack) {
            write_heatmap(fs::path(a.out) / ("prior_" + l.name + ".png"), l.raster);
            rasters.push_back(l.raster);
        }
        write_heatmap(fs::path(a.out) / "prior_integrated.png",
                      integrate(std::span<const SaliencyMap>(rasters), cfg.lambda, cfg.ca_steps));
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kFailed;
    }
    return kOk;
}

}  // namespace itself::cli
