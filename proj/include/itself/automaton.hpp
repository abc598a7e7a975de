#pragma once

// Cellular-automaton fusion of m pixel-aligned maps.
//
// Cells live in log space. A cell at (x,y) in layer i is influenced by every
// cell whose position is 4-adjacent to (x,y), in any layer; each neighbor
// votes +1/-1 depending on whether it is above its own layer's mean.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"

namespace itself {

constexpr double kAutomatonFloor = 1e-6;

struct AutomatonGrid {
    int width = 0;
    int height = 0;
    double lambda = 0.01;
    int t = 0;
    bool recompute_means = false;
    std::vector<std::vector<double>> cells;  // per layer, log values
    std::vector<double> mu;                   // per layer mean of the clamped map values
    std::vector<std::string> names;           // optional layer keys

    std::size_t layers() const { return cells.size(); }
    std::size_t pixel_count() const { return std::size_t(width) * height; }
};

namespace detail {

// sign() with a dead band so that a layer equal to its own mean is a fixed point
// despite rounding in the mean.
inline double vote(double log_value, double log_mean) {
    const double d = log_value - log_mean;
    if (std::abs(d) <= 1e-12 * std::max(1.0, std::abs(log_mean))) return 0.0;
    return d > 0.0 ? 1.0 : -1.0;
}

inline std::vector<double> init_layer(const SaliencyMap& map, double& mu) {
    std::vector<double> cells(map.pixel_count());
    double sum = 0.0;
    for (std::size_t p = 0; p < cells.size(); ++p) {
        const double v = std::clamp(map.values[p], kAutomatonFloor, 1.0);
        sum += v;
        cells[p] = std::log(v);
    }
    mu = cells.empty() ? 1.0 : sum / double(cells.size());
    return cells;
}

}  // namespace detail

inline AutomatonGrid init_grid(std::span<const SaliencyMap> maps, double lambda) {
    if (maps.empty()) throw InvalidArgument("init_grid: at least one map required");
    if (!(lambda > 0.0 && lambda <= 1.0)) throw InvalidArgument("init_grid: lambda must be in (0,1]");
    AutomatonGrid g;
    g.width = maps[0].width;
    g.height = maps[0].height;
    g.lambda = lambda;
    for (const SaliencyMap& m : maps) {
        if (m.width != g.width || m.height != g.height) throw InvalidArgument("init_grid: map dimensions differ");
        double mu = 0.0;
        g.cells.push_back(detail::init_layer(m, mu));
        g.mu.push_back(mu);
        g.names.emplace_back();
    }
    return g;
}

/// Synchronous update: every cell reads the t-1 state.
inline AutomatonGrid step(const AutomatonGrid& grid) {
    AutomatonGrid next = grid;
    const int w = grid.width, h = grid.height;
    const std::size_t n = grid.pixel_count();

    std::vector<double> log_mu(grid.layers());
    for (std::size_t i = 0; i < grid.layers(); ++i) {
        double mu = grid.mu[i];
        if (grid.recompute_means) {
            double s = 0.0;
            for (double c : grid.cells[i]) s += std::exp(c);
            mu = n ? s / double(n) : 1.0;
            next.mu[i] = mu;
        }
        log_mu[i] = std::log(mu);
    }

    // The neighborhood spans all layers, so the vote sum at a position is shared.
    std::vector<double> votes(n, 0.0);
    for (std::size_t i = 0; i < grid.layers(); ++i)
        for (std::size_t p = 0; p < n; ++p) votes[p] += detail::vote(grid.cells[i][p], log_mu[i]);

    std::vector<double> delta(n, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            if (x > 0) s += votes[std::size_t(y) * w + x - 1];
            if (x + 1 < w) s += votes[std::size_t(y) * w + x + 1];
            if (y > 0) s += votes[std::size_t(y - 1) * w + x];
            if (y + 1 < h) s += votes[std::size_t(y + 1) * w + x];
            delta[std::size_t(y) * w + x] = grid.lambda * s;
        }
    for (auto& layer : next.cells)
        for (std::size_t p = 0; p < n; ++p) layer[p] += delta[p];
    ++next.t;
    return next;
}

/// Logistic per cell, average over layers, then min-max.
inline SaliencyMap finalize(const AutomatonGrid& grid) {
    SaliencyMap out(grid.width, grid.height, 0.0);
    if (grid.layers() == 0) return out;
    for (const auto& layer : grid.cells)
        for (std::size_t p = 0; p < layer.size(); ++p) {
            const double e = std::exp(layer[p]);
            out.values[p] += e / (1.0 + e);
        }
    for (double& v : out.values) v /= double(grid.layers());
    return minmax_normalize(out);
}

inline SaliencyMap integrate(std::span<const SaliencyMap> maps, double lambda, int steps) {
    AutomatonGrid g = init_grid(maps, lambda);
    for (int s = 0; s < steps; ++s) g = step(g);
    return finalize(g);
}

/// Automaton whose layers persist across framework iterations, keyed by name.
/// Layers whose name survives keep their evolved cells and mean; new names are
/// initialized from the supplied map; missing names are dropped.
class PersistentAutomaton {
public:
    explicit PersistentAutomaton(double lambda, bool recompute_means = false) {
        grid_.lambda = lambda;
        grid_.recompute_means = recompute_means;
        if (!(lambda > 0.0 && lambda <= 1.0)) throw InvalidArgument("automaton: lambda must be in (0,1]");
    }

    void update_layers(const std::vector<std::pair<std::string, const SaliencyMap*>>& layers) {
        AutomatonGrid next;
        next.lambda = grid_.lambda;
        next.recompute_means = grid_.recompute_means;
        next.t = grid_.t;
        for (const auto& [name, map] : layers) {
            if (next.cells.empty()) {
                next.width = map->width;
                next.height = map->height;
            } else if (map->width != next.width || map->height != next.height) {
                throw InvalidArgument("automaton: layer dimensions differ");
            }
            std::size_t found = grid_.layers();
            for (std::size_t i = 0; i < grid_.layers(); ++i)
                if (grid_.names[i] == name) found = i;
            if (found < grid_.layers() && grid_.width == map->width && grid_.height == map->height) {
                next.cells.push_back(std::move(grid_.cells[found]));
                next.mu.push_back(grid_.mu[found]);
            } else {
                double mu = 0.0;
                next.cells.push_back(detail::init_layer(*map, mu));
                next.mu.push_back(mu);
            }
            next.names.push_back(name);
        }
        grid_ = std::move(next);
    }

    void advance(int steps) {
        for (int s = 0; s < steps; ++s) grid_ = step(grid_);
    }

    SaliencyMap result() const { return finalize(grid_); }
    const AutomatonGrid& grid() const { return grid_; }

private:
    AutomatonGrid grid_;
};

}  // namespace itself
