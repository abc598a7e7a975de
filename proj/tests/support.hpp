#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <random>
#include <vector>

#include <itself/itself.hpp>

namespace testing_support {

using namespace itself;

inline RgbImage random_rgb(int w, int h, std::mt19937& rng) {
    RgbImage img(w, h, 3);
    std::uniform_int_distribution<int> d(0, 255);
    for (auto& v : img.data) v = std::uint8_t(d(rng));
    return img;
}

inline SaliencyMap random_map(int w, int h, std::mt19937& rng) {
    SaliencyMap m(w, h);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (double& v : m.values) v = d(rng);
    return m;
}

inline RgbImage solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    RgbImage img(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            auto* p = img.at(x, y);
            p[0] = r;
            p[1] = g;
            p[2] = b;
        }
    return img;
}

/// Red disc on a mid-gray background, plus the disc mask.
struct DiscScene {
    RgbImage image;
    BinaryMask mask;
};

inline DiscScene red_disc(int size = 256, double radius = 40.0) {
    DiscScene s{solid(size, size, 128, 128, 128), BinaryMask(size, size)};
    const double c = (size - 1) / 2.0;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            if ((x - c) * (x - c) + (y - c) * (y - c) <= radius * radius) {
                auto* p = s.image.at(x, y);
                p[0] = 220;
                p[1] = 20;
                p[2] = 20;
                s.mask.values[std::size_t(y) * size + x] = 1;
            }
    return s;
}

/// Labels from rectangular blocks of size bw x bh, numbered in raster order.
inline LabelMap block_labels(int w, int h, int bw, int bh) {
    LabelMap lm;
    lm.width = w;
    lm.height = h;
    const int cols = (w + bw - 1) / bw;
    const int rows = (h + bh - 1) / bh;
    lm.count = cols * rows;
    lm.labels.resize(std::size_t(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) lm.labels[std::size_t(y) * w + x] = (y / bh) * cols + x / bw;
    return lm;
}

/// Single-source Dijkstra from one seed whose root features are fixed to that
/// seed; returns per-pixel costs. Written independently of the library's search.
inline std::vector<double> single_source_costs(const LabImage& img, const SaliencyMap& map, PixelCoord seed,
                                               double alpha, double beta, double gamma) {
    const int w = img.width, h = img.height;
    const std::size_t n = img.pixel_count();
    std::vector<double> cost(n, std::numeric_limits<double>::infinity());
    const std::size_t r = std::size_t(seed.y) * w + seed.x;
    cost[r] = 0.0;
    using E = std::pair<double, std::size_t>;
    std::priority_queue<E, std::vector<E>, std::greater<>> pq;
    pq.emplace(0.0, r);
    std::vector<char> done(n, 0);
    while (!pq.empty()) {
        auto [c, p] = pq.top();
        pq.pop();
        if (done[p]) continue;
        done[p] = 1;
        const int px = int(p % w), py = int(p / w);
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (!dx && !dy) continue;
                const int qx = px + dx, qy = py + dy;
                if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
                const std::size_t q = std::size_t(qy) * w + qx;
                double d2 = 0.0;
                for (int k = 0; k < img.channels; ++k) {
                    const double diff = img.data[r * img.channels + k] - img.data[q * img.channels + k];
                    d2 += diff * diff;
                }
                const double ds = std::fabs(map.values[r] - map.values[q]);
                const double term = alpha * std::sqrt(d2) * std::pow(gamma, ds) + gamma * ds;
                const double nc = c + std::sqrt(double(dx * dx + dy * dy)) + std::pow(term, beta);
                if (nc < cost[q]) {
                    cost[q] = nc;
                    pq.emplace(nc, q);
                }
            }
    }
    return cost;
}

/// Argmin over per-seed single-source costs; ties go to the lower seed index.
inline std::vector<int> argmin_oracle(const LabImage& img, const SaliencyMap& map, const std::vector<PixelCoord>& seeds,
                                      double alpha, double beta, double gamma) {
    std::vector<std::vector<double>> costs;
    for (PixelCoord s : seeds) costs.push_back(single_source_costs(img, map, s, alpha, beta, gamma));
    std::vector<int> out(img.pixel_count(), -1);
    for (std::size_t p = 0; p < out.size(); ++p) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < seeds.size(); ++i)
            if (costs[i][p] < best) {
                best = costs[i][p];
                out[p] = int(i);
            }
    }
    return out;
}

/// Distinct random seed coordinates.
inline std::vector<PixelCoord> random_seeds(int w, int h, int k, std::mt19937& rng) {
    std::vector<PixelCoord> out;
    std::uniform_int_distribution<int> dx(0, w - 1), dy(0, h - 1);
    while (int(out.size()) < k) {
        PixelCoord c{dx(rng), dy(rng)};
        bool dup = false;
        for (auto& o : out) dup |= o == c;
        if (!dup) out.push_back(c);
    }
    return out;
}

struct ForestCheck {
    bool coverage = true;
    bool connected = true;
    bool label_count = true;
    bool acyclic = true;
    bool monotone = true;
};

/// Coverage, 8-connectivity of every label, label count and predecessor chains.
inline ForestCheck check_forest(const SuperpixelSegmentation& seg, int expected_labels) {
    ForestCheck r;
    const LabelMap& lm = seg.label_map;
    const int w = lm.width, h = lm.height;
    const std::size_t n = lm.pixel_count();
    r.label_count = lm.count == expected_labels && is_valid(lm);
    for (int l : lm.labels) r.coverage &= l >= 0 && l < lm.count;

    std::vector<char> seen(n, 0);
    std::vector<char> label_seen(std::size_t(std::max(lm.count, 0)), 0);
    for (std::size_t s = 0; s < n && r.coverage; ++s) {
        const int l = lm.labels[s];
        if (seen[s]) continue;
        if (label_seen[std::size_t(l)]) {
            r.connected = false;  // a second component of the same label
            break;
        }
        label_seen[std::size_t(l)] = 1;
        std::queue<std::size_t> q;
        q.push(s);
        seen[s] = 1;
        while (!q.empty()) {
            const std::size_t p = q.front();
            q.pop();
            const int px = int(p % w), py = int(p / w);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int qx = px + dx, qy = py + dy;
                    if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
                    const std::size_t t = std::size_t(qy) * w + qx;
                    if (!seen[t] && lm.labels[t] == l) {
                        seen[t] = 1;
                        q.push(t);
                    }
                }
        }
    }

    const ForestState& f = seg.forest;
    if (!f.predecessor.empty()) {
        for (std::size_t p = 0; p < n; ++p) {
            std::size_t cur = p;
            std::size_t steps = 0;
            while (f.predecessor[cur] != -1 && steps <= n) {
                const std::size_t parent = std::size_t(f.predecessor[cur]);
                r.monotone &= f.cost[cur] >= f.cost[parent];
                r.acyclic &= lm.labels[parent] == lm.labels[cur];
                cur = parent;
                ++steps;
            }
            r.acyclic &= steps <= n && std::size_t(f.root[p]) == cur;
        }
    }
    return r;
}

/// Weighted F with an explicit n x n weight matrix.
inline WeightedPrf dense_weighted_prf(const SaliencyMap& map, const BinaryMask& gt) {
    const int w = gt.width;
    const std::size_t n = gt.pixel_count();
    std::vector<double> e(n);
    for (std::size_t p = 0; p < n; ++p) e[p] = std::abs(gt.values[p] - map.values[p]);
    std::vector<double> ew(n);
    for (std::size_t p = 0; p < n; ++p) {
        const int px = int(p % std::size_t(w)), py = int(p / std::size_t(w));
        if (gt.values[p]) {
            double num = 0, den = 0;
            for (std::size_t q = 0; q < n; ++q) {
                const int qx = int(q % std::size_t(w)), qy = int(q / std::size_t(w));
                if (!gt.values[q] || std::abs(qx - px) > 20 || std::abs(qy - py) > 20) continue;
                const double a = std::exp(-((qx - px) * (qx - px) + (qy - py) * (qy - py)) / 10.0);
                num += a * e[q];
                den += a;
            }
            ew[p] = std::min(e[p], num / den);
        } else {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t q = 0; q < n; ++q)
                if (gt.values[q]) {
                    const int qx = int(q % std::size_t(w)), qy = int(q / std::size_t(w));
                    best = std::min(best, std::hypot(qx - px, qy - py));
                }
            ew[p] = e[p] * (2.0 - std::exp(std::log(0.5) / 5.0 * best));
        }
    }
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t p = 0; p < n; ++p) {
        if (gt.values[p]) {
            tp += 1 - ew[p];
            fn += ew[p];
        } else {
            fp += ew[p];
        }
    }
    WeightedPrf r;
    r.precision = tp / (tp + fp);
    r.recall = tp / (tp + fn);
    r.f = 2 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

/// Automaton cells after `steps` updates, by direct transcription: for each
/// layer and cell, sum the votes of every 4-adjacent position in every layer,
/// then update all cells at once.
inline std::vector<std::vector<double>> ca_oracle_steps(const std::vector<SaliencyMap>& maps, double lambda, int steps) {
    const int w = maps[0].width, h = maps[0].height;
    const std::size_t m = maps.size();
    std::vector<std::vector<double>> cells(m), next;
    std::vector<double> log_mu(m);
    for (std::size_t i = 0; i < m; ++i) {
        double sum = 0;
        for (double v : maps[i].values) {
            const double c = std::clamp(v, 1e-6, 1.0);
            cells[i].push_back(std::log(c));
            sum += c;
        }
        log_mu[i] = std::log(sum / double(maps[i].pixel_count()));
    }
    for (int t = 0; t < steps; ++t) {
        next = cells;
        for (std::size_t i = 0; i < m; ++i)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double s = 0;
                    const int nx[4] = {x - 1, x + 1, x, x}, ny[4] = {y, y, y - 1, y + 1};
                    for (int k = 0; k < 4; ++k) {
                        if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
                        for (std::size_t j = 0; j < m; ++j) {
                            const double c = cells[j][std::size_t(ny[k]) * w + nx[k]];
                            s += c > log_mu[j] ? 1.0 : c < log_mu[j] ? -1.0 : 0.0;
                        }
                    }
                    next[i][std::size_t(y) * w + x] += lambda * s;
                }
        cells = next;
    }
    return cells;
}

}  // namespace testing_support
