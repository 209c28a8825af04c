#ifndef JFDL_TWOSAMPLE_HPP
#define JFDL_TWOSAMPLE_HPP

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "jfdl/errors.hpp"
#include "jfdl/rng.hpp"
#include "jfdl/vec2.hpp"

namespace jfdl {

/// Szekely-Rizzo energy distance between two 2-D samples:
/// 2 E|X-Y| - E|X-X'| - E|Y-Y'|. Nonnegative, zero iff equal distributions.
inline double energy_distance(std::span<const Vec2> x, std::span<const Vec2> y) {
    if (x.empty() || y.empty()) throw DomainError("energy_distance: empty sample");
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i)
        for (size_t j = 0; j < y.size(); ++j) sxy += distance(x[i], y[j]);
    for (size_t i = 0; i < x.size(); ++i)
        for (size_t j = i + 1; j < x.size(); ++j) sxx += distance(x[i], x[j]);
    for (size_t i = 0; i < y.size(); ++i)
        for (size_t j = i + 1; j < y.size(); ++j) syy += distance(y[i], y[j]);
    double m = static_cast<double>(x.size()), n = static_cast<double>(y.size());
    return 2.0 * sxy / (m * n) - 2.0 * sxx / (m * m) - 2.0 * syy / (n * n);
}

struct PermutationTestResult {
    double statistic = 0.0;
    double threshold = 0.0; // 95th percentile of the permutation null
    bool pass = false;      // statistic below the null band
    int n_x = 0, n_y = 0, rounds = 0;
};

/// Two-sample energy test with a label-permutation null. The pooled pairwise
/// distance matrix is built once (float, packed upper triangle) and reused by
/// every permutation round, so rounds cost O(N^2) additions, not distance
/// evaluations.
inline PermutationTestResult energy_permutation_test(std::span<const Vec2> x,
                                                     std::span<const Vec2> y, int rounds,
                                                     Rng& rng) {
    const size_t m = x.size(), n = y.size(), total = m + n;
    if (m < 2 || n < 2) throw DomainError("energy_permutation_test: need >= 2 points per sample");
    if (total > 20000) throw ConfigError("energy_permutation_test: pooled sample too large");
    if (rounds < 10) throw ConfigError("energy_permutation_test: need >= 10 rounds");

    std::vector<Vec2> pooled;
    pooled.reserve(total);
    pooled.insert(pooled.end(), x.begin(), x.end());
    pooled.insert(pooled.end(), y.begin(), y.end());

    std::vector<float> dist(total * (total - 1) / 2);
    size_t idx = 0;
    for (size_t i = 0; i < total; ++i)
        for (size_t j = i + 1; j < total; ++j)
            dist[idx++] = static_cast<float>(distance(pooled[i], pooled[j]));

    std::vector<uint8_t> label(total);
    auto statistic_for = [&](const std::vector<uint8_t>& lab) {
        double acc[3] = {0.0, 0.0, 0.0}; // key = lab_i + lab_j: xx, xy, yy
        size_t k = 0;
        for (size_t i = 0; i < total; ++i) {
            unsigned li = lab[i];
            for (size_t j = i + 1; j < total; ++j, ++k) acc[li + lab[j]] += dist[k];
        }
        double dm = static_cast<double>(m), dn = static_cast<double>(n);
        return 2.0 * acc[1] / (dm * dn) - 2.0 * acc[0] / (dm * dm) - 2.0 * acc[2] / (dn * dn);
    };

    for (size_t i = 0; i < total; ++i) label[i] = i < m ? 0 : 1;
    PermutationTestResult res;
    res.statistic = statistic_for(label);
    res.n_x = static_cast<int>(m);
    res.n_y = static_cast<int>(n);
    res.rounds = rounds;

    std::vector<double> null_stats(static_cast<size_t>(rounds));
    for (int r = 0; r < rounds; ++r) {
        for (size_t i = total - 1; i > 0; --i) {
            size_t j = static_cast<size_t>(rng.below(i + 1));
            std::swap(label[i], label[j]);
        }
        null_stats[static_cast<size_t>(r)] = statistic_for(label);
    }
    std::sort(null_stats.begin(), null_stats.end());
    double pos = 0.95 * (rounds - 1);
    size_t lo = static_cast<size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    res.threshold = (1.0 - frac) * null_stats[lo] +
                    frac * null_stats[std::min(lo + 1, null_stats.size() - 1)];
    res.pass = res.statistic < res.threshold;
    return res;
}

/// Biased (V-statistic) RBF-kernel MMD^2, bandwidth = median pairwise distance
/// of the pooled sample.
inline double mmd_rbf(std::span<const Vec2> x, std::span<const Vec2> y) {
    if (x.empty() || y.empty()) throw DomainError("mmd_rbf: empty sample");
    std::vector<double> dists;
    dists.reserve((x.size() + y.size()) * (x.size() + y.size()) / 2);
    auto all = [&](std::span<const Vec2> a, std::span<const Vec2> b, bool same) {
        for (size_t i = 0; i < a.size(); ++i)
            for (size_t j = same ? i + 1 : 0; j < b.size(); ++j) dists.push_back(distance(a[i], b[j]));
    };
    all(x, x, true);
    all(y, y, true);
    all(x, y, false);
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2),
                     dists.end());
    double h = dists[dists.size() / 2];
    if (h <= 0.0) h = 1.0;
    double gamma = 1.0 / (2.0 * h * h);

    auto kmean = [&](std::span<const Vec2> a, std::span<const Vec2> b) {
        double s = 0.0;
        for (size_t i = 0; i < a.size(); ++i)
            for (size_t j = 0; j < b.size(); ++j) s += std::exp(-gamma * (a[i] - b[j]).norm2());
        return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
    };
    double v = kmean(x, x) + kmean(y, y) - 2.0 * kmean(x, y);
    return std::max(v, 0.0);
}

/// Trace of the sample covariance (sum of per-coordinate variances).
inline double sample_variance(std::span<const Vec2> x) {
    if (x.size() < 2) throw DomainError("sample_variance: need >= 2 points");
    Vec2 mean{0.0, 0.0};
    for (Vec2 p : x) mean += p;
    mean = mean / static_cast<double>(x.size());
    double acc = 0.0;
    for (Vec2 p : x) acc += (p - mean).norm2();
    return acc / static_cast<double>(x.size() - 1);
}

} // namespace jfdl

#endif
