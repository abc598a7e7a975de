#pragma once

// The iterative saliency/superpixel loop and its configuration.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "automaton.hpp"
#include "core.hpp"
#include "graph.hpp"
#include "oisf.hpp"
#include "priors.hpp"
#include "queries.hpp"

namespace itself {

enum class QueryStrategy { Border, Prior, Scribble };

inline const char* to_string(QueryStrategy s) {
    switch (s) {
        case QueryStrategy::Border: return "border";
        case QueryStrategy::Prior: return "prior";
        case QueryStrategy::Scribble: return "scribble";
    }
    return "?";
}

inline const std::vector<std::string>& known_priors() {
    static const std::vector<std::string> names{"center", "color_uniqueness", "red_yellow", "white", "black",
                                                "saliency_color", "focus", "ellipse", "scribble"};
    return names;
}

/// Raised for malformed or out-of-range configuration. `key` names the offending entry.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what) : Error("config key '" + key + "': " + what), key(std::move(key)) {}
    std::string key;
};

struct PipelineConfig {
    OisfParams oisf;
    double psi = 0.5;
    double sigma_s = 0.4;
    double lambda = 0.01;
    int ca_steps = 1;
    int iterations = 8;
    double sigma1 = 0.2;
    double sigma2 = 0.2;
    double sigma3 = 0.2;
    double sigma3_prime = 0.2;
    double sigma4 = 0.5;
    double sigma5 = 1.0;
    double sigma_scribble = 0.1;
    double s0 = 1500.0;
    double s1 = 5000.0;
    std::vector<std::string> priors;
    QueryStrategy query_strategy = QueryStrategy::Border;

    bool has_prior(std::string_view name) const {
        return std::find(priors.begin(), priors.end(), name) != priors.end();
    }

    void validate() const {
        auto positive = [](const char* key, double v) {
            if (!(v > 0.0)) throw ConfigError(key, "must be > 0");
        };
        if (oisf.n < 2) throw ConfigError("n", "must be >= 2");
        if (!(oisf.kappa > 0.0 && oisf.kappa <= 1.0)) throw ConfigError("kappa", "must lie in (0,1]");
        if (oisf.inner_iters < 1) throw ConfigError("inner_iters", "must be >= 1");
        if (oisf.alpha < 0.0) throw ConfigError("alpha", "must be >= 0");
        if (oisf.beta < 0.0) throw ConfigError("beta", "must be >= 0");
        if (oisf.gamma < 0.0) throw ConfigError("gamma", "must be >= 0");
        if (oisf.n_object < 0.0) throw ConfigError("n_object", "must be >= 0");
        if (oisf.object_as_fraction && oisf.n_object > 1.0) throw ConfigError("n_object", "fraction must be <= 1");
        if (psi < 0.0 || psi > 1.0) throw ConfigError("psi", "must lie in [0,1]");
        positive("sigma_s", sigma_s);
        if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("lambda", "must lie in (0,1]");
        if (ca_steps < 0) throw ConfigError("ca_steps", "must be >= 0");
        if (iterations < 2) throw ConfigError("iterations", "must be >= 2");
        positive("sigma1", sigma1);
        positive("sigma2", sigma2);
        positive("sigma3", sigma3);
        positive("sigma3_prime", sigma3_prime);
        positive("sigma4", sigma4);
        positive("sigma5", sigma5);
        positive("sigma_scribble", sigma_scribble);
        if (s0 < 0.0 || !(s1 > s0)) throw ConfigError("s1", "size filter needs 0 <= s0 < s1");
        for (const std::string& p : priors)
            if (std::find(known_priors().begin(), known_priors().end(), p) == known_priors().end())
                throw ConfigError("priors", "unknown prior '" + p + "'");
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_real(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a number, got '" + v + "'");
    }
    if (used != v.size() || !std::isfinite(out)) throw ConfigError(key, "expected a number, got '" + v + "'");
    return out;
}

inline int parse_int(const std::string& key, const std::string& v) {
    const double d = parse_real(key, v);
    if (d != std::floor(d) || std::abs(d) > 1e9) throw ConfigError(key, "expected an integer, got '" + v + "'");
    return static_cast<int>(d);
}

}  // namespace detail

/// Applies one key=value assignment.
inline void apply_setting(PipelineConfig& c, const std::string& key, const std::string& value) {
    using detail::parse_int;
    using detail::parse_real;
    static const std::map<std::string, double PipelineConfig::*> reals{
        {"psi", &PipelineConfig::psi},       {"sigma_s", &PipelineConfig::sigma_s},
        {"lambda", &PipelineConfig::lambda}, {"sigma1", &PipelineConfig::sigma1},
        {"sigma2", &PipelineConfig::sigma2}, {"sigma3", &PipelineConfig::sigma3},
        {"sigma3_prime", &PipelineConfig::sigma3_prime}, {"sigma4", &PipelineConfig::sigma4},
        {"sigma5", &PipelineConfig::sigma5}, {"sigma_scribble", &PipelineConfig::sigma_scribble},
        {"s0", &PipelineConfig::s0},         {"s1", &PipelineConfig::s1}};
    if (auto it = reals.find(key); it != reals.end()) {
        c.*(it->second) = parse_real(key, value);
    } else if (key == "n") {
        c.oisf.n = parse_int(key, value);
    } else if (key == "alpha") {
        c.oisf.alpha = parse_real(key, value);
    } else if (key == "beta") {
        c.oisf.beta = parse_real(key, value);
    } else if (key == "gamma") {
        c.oisf.gamma = parse_real(key, value);
    } else if (key == "kappa") {
        c.oisf.kappa = parse_real(key, value);
    } else if (key == "inner_iters") {
        c.oisf.inner_iters = parse_int(key, value);
    } else if (key == "n_object") {
        c.oisf.n_object = parse_real(key, value);
    } else if (key == "n_object_mode") {
        if (value == "count") c.oisf.object_as_fraction = false;
        else if (value == "fraction") c.oisf.object_as_fraction = true;
        else throw ConfigError(key, "expected 'count' or 'fraction'");
    } else if (key == "ca_steps") {
        c.ca_steps = parse_int(key, value);
    } else if (key == "iterations") {
        c.iterations = parse_int(key, value);
    } else if (key == "priors") {
        c.priors.clear();
        if (value == "none") return;
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = detail::trim(item);
            if (item.empty()) continue;
            if (std::find(known_priors().begin(), known_priors().end(), item) == known_priors().end())
                throw ConfigError(key, "unknown prior '" + item + "'");
            if (!c.has_prior(item)) c.priors.push_back(item);
        }
    } else if (key == "query_strategy") {
        if (value == "border") c.query_strategy = QueryStrategy::Border;
        else if (value == "prior") c.query_strategy = QueryStrategy::Prior;
        else if (value == "scribble") c.query_strategy = QueryStrategy::Scribble;
        else throw ConfigError(key, "expected border, prior or scribble");
    } else {
        throw ConfigError(key, "unknown key");
    }
}

/// Reads `key = value` lines on top of `base`. `#` starts a comment.
inline PipelineConfig parse_config(std::istream& in, PipelineConfig base = {}) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(line, "line " + std::to_string(lineno) + " is not of the form key=value");
        apply_setting(base, detail::trim(std::string_view(line).substr(0, eq)),
                      detail::trim(std::string_view(line).substr(eq + 1)));
    }
    base.validate();
    return base;
}

inline PipelineConfig parse_config(const std::string& text, PipelineConfig base = {}) {
    std::istringstream in(text);
    return parse_config(in, std::move(base));
}

// The same text ships as presets/<name>.conf.
inline const std::map<std::string, std::string>& preset_texts() {
    static const std::map<std::string, std::string> presets{
        {"ecssd",
         "sigma1 = 0.2\nsigma2 = 0.2\nsigma3 = 0.2\nsigma3_prime = 0.2\nsigma4 = 0.5\n"
         "n = 200\ngamma = 2.0\nlambda = 0.01\npsi = 0.5\n"
         "priors = center,color_uniqueness,red_yellow,white,focus,saliency_color\nquery_strategy = border\n"},
        {"dut_omron",
         "sigma1 = 0.2\nsigma2 = 0.5\nsigma3_prime = 0.5\nsigma4 = 0.5\n"
         "n = 200\ngamma = 2.0\nlambda = 0.008\npsi = 0.3\n"
         "priors = center,color_uniqueness,white,focus,saliency_color\nquery_strategy = border\n"},
        {"icoseg",
         "sigma1 = 0.2\nsigma2 = 0.5\nsigma3 = 0.2\nsigma3_prime = 0.8\nsigma4 = 0.5\n"
         "n = 200\ngamma = 2.0\nlambda = 0.01\npsi = 0.8\n"
         "priors = center,color_uniqueness,red_yellow,white,focus,saliency_color\nquery_strategy = border\n"},
        {"msra10k",
         "sigma1 = 0.2\nsigma2 = 0.5\nsigma3 = 0.8\nsigma3_prime = 0.8\nsigma4 = 0.8\n"
         "n = 200\ngamma = 1.0\nlambda = 0.01\npsi = 0.3\n"
         "priors = center,color_uniqueness,red_yellow,white,focus,saliency_color\nquery_strategy = border\n"},
        {"lungs",
         "sigma3 = 0.5\nsigma4 = 0.8\n"
         "n = 200\ngamma = 2.0\nlambda = 0.01\npsi = 0.3\n"
         "priors = black,focus\nquery_strategy = prior\n"},
        {"parasites",
         "sigma2 = 0.2\nsigma3_prime = 0.2\nsigma5 = 1.0\n"
         "n = 500\ngamma = 0.5\nlambda = 0.05\npsi = 0.5\n"
         "priors = color_uniqueness,white,ellipse\nquery_strategy = prior\n"},
    };
    return presets;
}

inline PipelineConfig preset(const std::string& name) {
    const auto& all = preset_texts();
    auto it = all.find(name);
    if (it == all.end()) throw ConfigError("preset", "unknown preset '" + name + "'");
    return parse_config(it->second);
}

// ---------------------------------------------------------------------------
// Priors per iteration

/// Computes every enabled prior for one segmentation. `previous` feeds the
/// saliency-color prior and is null on the first iteration (the prior is then skipped).
inline PriorStack compute_priors(const LabImage& image, const SuperpixelSegmentation& seg,
                                 const QuantizedPalette& palette, const PipelineConfig& cfg,
                                 const SaliencyMap* previous = nullptr, const ScribbleSet* scribbles = nullptr) {
    PriorStack stack;
    const LabelMap& lm = seg.label_map;
    for (const std::string& name : cfg.priors) {
        std::vector<double> scores;
        if (name == "center") {
            scores = center_prior(seg, cfg.sigma1);
        } else if (name == "color_uniqueness") {
            scores = color_uniqueness_prior(seg, palette, cfg.sigma2);
        } else if (name == "red_yellow") {
            scores = channel_combination_prior(seg, palette, ChannelCombination::red_yellow(), cfg.sigma3);
        } else if (name == "white") {
            scores = channel_combination_prior(seg, palette, ChannelCombination::white(), cfg.sigma3_prime);
        } else if (name == "black") {
            scores = channel_combination_prior(seg, palette, ChannelCombination::black(), cfg.sigma3);
        } else if (name == "saliency_color") {
            if (!previous) continue;
            scores = saliency_color_prior(seg, palette, *previous);
        } else if (name == "focus") {
            scores = focus_prior(image, seg, cfg.sigma4);
        } else if (name == "ellipse") {
            scores = ellipse_prior(seg, cfg.sigma5, cfg.s0, cfg.s1);
        } else if (name == "scribble") {
            if (!scribbles || scribbles->empty()) throw InvalidArgument("scribble prior enabled without scribbles");
            scores = superpixel_means(lm, scribble_prior(image.width, image.height, *scribbles, cfg.sigma_scribble));
        } else {
            throw ConfigError("priors", "unknown prior '" + name + "'");
        }
        stack.push_back(make_layer(name, std::move(scores), lm));
    }
    return stack;
}

inline std::vector<std::pair<std::string, const SaliencyMap*>> layer_refs(const PriorStack& stack) {
    std::vector<std::pair<std::string, const SaliencyMap*>> refs;
    for (const PriorLayer& l : stack) refs.emplace_back(l.name, &l.raster);
    return refs;
}

// ---------------------------------------------------------------------------
// Driver

struct IterationTrace {
    int superpixels = 0;
    SuperpixelSegmentation segmentation;
    PriorStack priors;
    SaliencyMap prior_map;  // integrated prior stack (constant 1 when no prior is enabled)
    QuerySet queries;
    bool border_queries = false;  // iteration scored by the cluster-border strategy
    SaliencyMap saliency;
    std::vector<std::string> notes;
};

struct RunTrace {
    SaliencyMap seed_map;  // object map used for iteration 1 seeding
    std::vector<IterationTrace> iterations;
    SaliencyMap final_map;
};

namespace detail {

// Query superpixels carried between iterations as pixel masks so they can be
// re-expressed on a new segmentation.
struct QueryMemory {
    bool border = false;
    std::vector<char> fg_pixels;
    std::vector<char> bg_pixels;

    static QueryMemory from(const SuperpixelSegmentation& seg, const QuerySet& q, bool border) {
        QueryMemory m;
        m.border = border;
        const LabelMap& lm = seg.label_map;
        std::vector<char> fg(std::size_t(lm.count), 0), bg(std::size_t(lm.count), 0);
        for (int i : q.foreground) fg[std::size_t(i)] = 1;
        for (int i : q.background) bg[std::size_t(i)] = 1;
        m.fg_pixels.resize(lm.pixel_count());
        m.bg_pixels.resize(lm.pixel_count());
        for (std::size_t p = 0; p < lm.pixel_count(); ++p) {
            m.fg_pixels[p] = fg[std::size_t(lm.labels[p])];
            m.bg_pixels[p] = bg[std::size_t(lm.labels[p])];
        }
        return m;
    }

    // Superpixels at least half covered by the mask; the best-covered one if none is.
    static std::vector<int> project(const LabelMap& lm, const std::vector<char>& mask) {
        std::vector<std::size_t> hits(std::size_t(lm.count), 0), size(std::size_t(lm.count), 0);
        for (std::size_t p = 0; p < lm.pixel_count(); ++p) {
            ++size[std::size_t(lm.labels[p])];
            hits[std::size_t(lm.labels[p])] += mask[p] ? 1 : 0;
        }
        std::vector<int> out;
        int best = -1;
        for (int i = 0; i < lm.count; ++i) {
            if (2 * hits[std::size_t(i)] >= size[std::size_t(i)] && hits[std::size_t(i)] > 0) out.push_back(i);
            if (hits[std::size_t(i)] > 0 && (best < 0 || hits[std::size_t(i)] > hits[std::size_t(best)])) best = i;
        }
        if (out.empty() && best >= 0) out.push_back(best);
        return out;
    }

    QuerySet project(const LabelMap& lm) const {
        QuerySet q;
        q.foreground = project(lm, fg_pixels);
        q.background = project(lm, bg_pixels);
        return q;
    }
};

inline QuerySet scribble_queries(const SuperpixelSegmentation& seg, const ScribbleSet& s) {
    const LabelMap& lm = seg.label_map;
    std::set<int> fg, bg;
    for (const PixelCoord& c : s.object) fg.insert(lm(c.x, c.y));
    for (const PixelCoord& c : s.background) bg.insert(lm(c.x, c.y));
    // A superpixel hit by both kinds of scribble is ambiguous and is not used.
    QuerySet q;
    for (int i : fg)
        if (!bg.count(i)) q.foreground.push_back(i);
    for (int i : bg)
        if (!fg.count(i)) q.background.push_back(i);
    if (q.empty()) throw EmptyQuerySet("scribbles do not yield any unambiguous query superpixel");
    return q;
}

}  // namespace detail

/// Runs the full loop. Iteration 1 seeds OISF from the integrated priors of a
/// bootstrap segmentation made on a uniform map; later iterations seed from
/// the previous saliency map. The first map is left out of the final fusion.
inline RunTrace run(const LabImage& image, const PipelineConfig& cfg, const ScribbleSet* scribbles = nullptr) {
    cfg.validate();
    if (image.pixel_count() == 0) throw InvalidArgument("run: empty image");
    const bool needs_scribbles = cfg.query_strategy == QueryStrategy::Scribble || cfg.has_prior("scribble");
    if (needs_scribbles && (!scribbles || scribbles->empty()))
        throw InvalidArgument("run: scribbles are required by the configuration");
    if (scribbles && (scribbles->width != image.width || scribbles->height != image.height) && !scribbles->empty())
        throw InvalidArgument("run: scribble mask dimensions differ from the image");

    const QuantizedPalette palette = quantize(image);
    const SaliencyMap uniform(image.width, image.height, 0.5);
    RunTrace trace;

    OisfParams params = cfg.oisf;
    params.n = std::min<int>(params.n, int(image.pixel_count()));
    params.validate();

    if (cfg.priors.empty() || (cfg.priors.size() == 1 && cfg.priors[0] == "saliency_color")) {
        trace.seed_map = uniform;
    } else {
        const SuperpixelSegmentation boot = oisf_segment(image, uniform, params, &palette);
        const PriorStack stack = compute_priors(image, boot, palette, cfg, nullptr, scribbles);
        std::vector<SaliencyMap> rasters;
        for (const PriorLayer& l : stack) rasters.push_back(l.raster);
        trace.seed_map = integrate(std::span<const SaliencyMap>(rasters), cfg.lambda, cfg.ca_steps);
    }

    PersistentAutomaton prior_automaton(cfg.lambda);
    detail::QueryMemory memory;
    int n = params.n;

    for (int t = 1; t <= cfg.iterations; ++t) {
        IterationTrace it;
        const SaliencyMap* previous = t > 1 ? &trace.iterations.back().saliency : nullptr;
        if (t > 1) n = std::min<int>(next_scale(n, params.kappa), int(image.pixel_count()));
        OisfParams p = params;
        p.n = n;
        it.segmentation = oisf_segment(image, previous ? *previous : trace.seed_map, p, &palette);
        const SuperpixelSegmentation& seg = it.segmentation;
        it.superpixels = seg.count();

        it.priors = compute_priors(image, seg, palette, cfg, previous, scribbles);
        std::vector<double> prior_scores(std::size_t(seg.count()), 1.0);
        if (it.priors.empty()) {
            it.prior_map = SaliencyMap(image.width, image.height, 1.0);
        } else {
            prior_automaton.update_layers(layer_refs(it.priors));
            prior_automaton.advance(cfg.ca_steps);
            it.prior_map = prior_automaton.result();
            prior_scores = superpixel_means(seg.label_map, it.prior_map);
        }

        ColorSimilarity similarity(seg, palette, cfg.sigma_s);
        std::optional<std::vector<double>> vs;

        auto border_scores = [&]() -> bool {
            try {
                const ClusterAssignment clusters = opf_cluster(seg);
                BorderQueryResult r = border_query_saliency(seg, similarity, clusters, cfg.psi);
                for (int g = 0; g < clusters.count; ++g)
                    for (int s : clusters.border[std::size_t(g)]) it.queries.background.push_back(s);
                std::sort(it.queries.background.begin(), it.queries.background.end());
                vs = std::move(r.scores);
                it.border_queries = true;
                return true;
            } catch (const NoBoundaryCluster&) {
                it.notes.push_back("no cluster touches the border");
                return false;
            }
        };

        if (t == 1) {
            QueryStrategy strategy = cfg.query_strategy;
            if (strategy == QueryStrategy::Border && seg.count() >= 2 && !border_scores()) strategy = QueryStrategy::Prior;
            if (strategy == QueryStrategy::Border && seg.count() < 2) strategy = QueryStrategy::Prior;
            if (strategy == QueryStrategy::Prior) {
                try {
                    it.queries = saliency_queries(seg, it.priors.empty() ? trace.seed_map : it.prior_map,
                                                  Polarity::Both);
                } catch (const EmptyQuerySet& e) {
                    throw Error(std::string("iteration 1: query selection failed: ") + e.what());
                }
            } else if (strategy == QueryStrategy::Scribble) {
                it.queries = detail::scribble_queries(seg, *scribbles);
            }
        } else {
            try {
                // Below-mean superpixels join as background queries; with
                // foreground queries alone, a small object split into few
                // superpixels is outvoted by the above-mean background ones.
                it.queries = saliency_queries(seg, *previous, Polarity::Both);
            } catch (const EmptyQuerySet&) {
                it.notes.push_back("empty foreground selection; previous queries reused");
                if (memory.border) {
                    if (!border_scores()) throw Error("iteration " + std::to_string(t) + ": no usable queries");
                } else {
                    it.queries = memory.project(seg.label_map);
                    if (it.queries.empty()) throw Error("iteration " + std::to_string(t) + ": no usable queries");
                }
            }
        }

        if (!vs) {
            SuperpixelGraph graph = build_graph(seg, it.queries, cfg.psi);
            weight_edges(graph, similarity);
            vs = vertex_saliency(graph);
        }
        it.saliency = apply_prior(*vs, prior_scores, seg.label_map);
        memory = detail::QueryMemory::from(seg, it.queries, it.border_queries);
        trace.iterations.push_back(std::move(it));
    }

    std::vector<SaliencyMap> kept;
    for (std::size_t i = 1; i < trace.iterations.size(); ++i) kept.push_back(trace.iterations[i].saliency);
    trace.final_map = integrate(std::span<const SaliencyMap>(kept), cfg.lambda, cfg.ca_steps);
    return trace;
}

}  // namespace itself
