#ifndef JFDL_PSEUDO_NOISE_HPP
#define JFDL_PSEUDO_NOISE_HPP

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "jfdl/dataset.hpp"
#include "jfdl/errors.hpp"
#include "jfdl/gmm.hpp"
#include "jfdl/normality.hpp"
#include "jfdl/rng.hpp"
#include "jfdl/solver.hpp"
#include "jfdl/util.hpp"
#include "jfdl/vec2.hpp"

namespace jfdl {

/// One draw of the pseudo-noise construction at noise index t: anchors from
/// the solver, the mixed-signal y0_null + (y0_c - y0_null)/t, and the
/// pseudo-noise mixed + sigma_max * z'' with fresh noise.
struct PseudoNoiseSample {
    double t = 0.0;
    Vec2 mixed_signal;
    Vec2 pseudo_noise;
    Vec2 y0_c;
    Vec2 y0_null;
};

/// Source of clean labeled draws; adapts either an analytic mixture or a
/// dataset resampled with replacement.
using DataDraw = std::function<LabeledPoint2D(Rng&)>;

inline DataDraw draw_from(const GaussianMixture& gm) {
    return [&gm](Rng& rng) { return gm.sample(rng); };
}

inline DataDraw draw_from(const std::vector<LabeledPoint2D>& data) {
    return [&data](Rng& rng) { return data[static_cast<size_t>(rng.below(data.size()))]; };
}

inline std::vector<PseudoNoiseSample> build_pseudo_noise(const SolverHandle& solver,
                                                         const DataDraw& draw, double t, int n,
                                                         Rng& rng) {
    if (t <= 0.0) throw DomainError("build_pseudo_noise: singular at t = 0");
    if (t > 1.0) throw DomainError("build_pseudo_noise: t must be in (0,1]");
    if (n < 8) throw DomainError("build_pseudo_noise: need n >= 8");
    double sigma_max = solver.scheme().sigma_max;
    std::vector<PseudoNoiseSample> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        LabeledPoint2D p = draw(rng);
        Vec2 z{rng.normal(), rng.normal()};
        Vec2 x_t = p.x + solver.scheme().sigma(t) * z;
        auto [y_c, y_null] = solver.hybrid_anchor_from_noisy(x_t, t, p.label);
        // y0_c replaces x0_c in the mixed-signal.
        Vec2 mixed = y_null + (y_c - y_null) / t;
        Vec2 z2{rng.normal(), rng.normal()};
        out[static_cast<size_t>(i)] = {t, mixed, mixed + sigma_max * z2, y_c, y_null};
        if (!mixed.finite()) throw NumericError("build_pseudo_noise: non-finite mixed-signal");
    }
    return out;
}

/// Aggregate log SNR over flattened coordinates:
/// 10 log10(|mixed|^2 / |pseudo - mixed|^2). All-zero signal reports the
/// -120 dB floor; zero noise energy is a degenerate input.
inline double snr_db(const std::vector<PseudoNoiseSample>& samples) {
    if (samples.empty()) throw DomainError("snr_db: empty sample");
    double sig = 0.0, noise = 0.0;
    for (const auto& s : samples) {
        sig += s.mixed_signal.norm2();
        noise += (s.pseudo_noise - s.mixed_signal).norm2();
    }
    if (noise <= 0.0) throw DomainError("snr_db: zero noise energy");
    if (sig <= 0.0) return -120.0;
    return 10.0 * std::log10(sig / noise);
}

struct PseudoNoiseCell {
    double t = 0.0;
    double sigma_t = 0.0;
    NormalityVerdict verdict;
    double snr_db = 0.0;
    int n_flat = 0;
};

struct PseudoNoiseReport {
    std::string dataset;
    std::string backend;
    std::vector<double> t_grid;
    // verdicts[test][t_index], tests ordered SW, AD, KS.
    std::vector<std::vector<PseudoNoiseCell>> cells;

    int total_cells() const {
        int n = 0;
        for (const auto& row : cells) n += static_cast<int>(row.size());
        return n;
    }
    int passed_cells() const {
        int n = 0;
        for (const auto& row : cells)
            for (const auto& c : row) n += c.verdict.pass ? 1 : 0;
        return n;
    }
    double max_snr_db() const {
        double m = -1e30;
        for (const auto& c : cells.front()) m = std::max(m, c.snr_db);
        return m;
    }
};

/// Default analysis grid: 20 log-spaced noise levels on sigma in
/// [0.002, sigma_max], mapped to t.
inline std::vector<double> default_t_grid(const VEScheme& scheme, int points = 20,
                                          double sigma_lo = 0.002) {
    std::vector<double> t(static_cast<size_t>(points));
    double ratio = std::log(scheme.sigma_max / sigma_lo);
    for (int i = 0; i < points; ++i) {
        double f = points == 1 ? 1.0 : static_cast<double>(i) / (points - 1);
        t[static_cast<size_t>(i)] = sigma_lo * std::exp(ratio * f) / scheme.sigma_max;
    }
    t.back() = 1.0;
    return t;
}

/// Flattened coordinates of the pseudo-noise (2n scalars for n 2-D points).
inline std::vector<double> flatten_pseudo(const std::vector<PseudoNoiseSample>& samples) {
    std::vector<double> flat;
    flat.reserve(samples.size() * 2);
    for (const auto& s : samples) {
        flat.push_back(s.pseudo_noise.x);
        flat.push_back(s.pseudo_noise.y);
    }
    return flat;
}

/// Runs the three normality tests and the SNR on every grid point. Cells get
/// independent RNG streams derived from (seed, t-index), so results do not
/// depend on scheduling.
inline PseudoNoiseReport run_grid(const SolverHandle& solver, const DataDraw& draw,
                                  const std::vector<double>& t_grid, int n_per_t, uint64_t seed,
                                  int threads = 1, const std::string& dataset_name = "",
                                  double alpha = 0.05) {
    for (double t : t_grid)
        if (t <= 0.0 || t > 1.0) throw DomainError("run_grid: t grid must lie in (0,1]");
    PseudoNoiseReport rep;
    rep.dataset = dataset_name;
    rep.backend = to_string(solver.backend());
    rep.t_grid = t_grid;
    rep.cells.assign(3, std::vector<PseudoNoiseCell>(t_grid.size()));

    parallel_for(static_cast<int>(t_grid.size()), threads, [&](int ti) {
        double t = t_grid[static_cast<size_t>(ti)];
        Rng rng = substream(seed, "noise-grid", static_cast<uint64_t>(ti));
        auto samples = build_pseudo_noise(solver, draw, t, n_per_t, rng);
        auto flat = flatten_pseudo(samples);
        double snr = snr_db(samples);

        PseudoNoiseCell base;
        base.t = t;
        base.sigma_t = solver.scheme().sigma(t);
        base.snr_db = snr;
        base.n_flat = static_cast<int>(flat.size());

        PseudoNoiseCell sw = base;
        sw.verdict = shapiro_wilk(flat, rng, alpha);
        rep.cells[0][static_cast<size_t>(ti)] = sw;
        PseudoNoiseCell ad = base;
        ad.verdict = anderson_darling(flat, alpha);
        rep.cells[1][static_cast<size_t>(ti)] = ad;
        PseudoNoiseCell ks = base;
        ks.verdict = kolmogorov_smirnov(flat, alpha);
        rep.cells[2][static_cast<size_t>(ti)] = ks;
    });
    return rep;
}

/// One row per (test, t): the Fig.-2-style grid in long form.
inline void write_noise_report_csv(const std::string& path, const PseudoNoiseReport& rep) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write report: " + path);
    f << "test,t,sigma_t,statistic,p_or_critical,pass,snr_db,n_flat\n";
    char buf[256];
    for (const auto& row : rep.cells) {
        for (const auto& c : row) {
            std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g,%.10g,%.10g,%d,%.6g,%d\n",
                          to_string(c.verdict.test), c.t, c.sigma_t, c.verdict.statistic,
                          c.verdict.p_or_critical, c.verdict.pass ? 1 : 0, c.snr_db, c.n_flat);
            f << buf;
        }
    }
}

/// Companion long-format file for heatmap rendering: dataset/backend echoed on
/// every row, one row per cell.
inline void write_noise_heatmap_csv(const std::string& path, const PseudoNoiseReport& rep) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write heatmap: " + path);
    f << "dataset,backend,test,t_index,sigma_t,pass,snr_db\n";
    char buf[256];
    for (const auto& row : rep.cells) {
        for (size_t ti = 0; ti < row.size(); ++ti) {
            const auto& c = row[ti];
            std::snprintf(buf, sizeof(buf), "%s,%s,%s,%zu,%.10g,%d,%.6g\n", rep.dataset.c_str(),
                          rep.backend.c_str(), to_string(c.verdict.test), ti, c.sigma_t,
                          c.verdict.pass ? 1 : 0, c.snr_db);
            f << buf;
        }
    }
}

} // namespace jfdl

#endif
