// Monte-Carlo calibration of the Anderson-Darling critical values (normal
// null, mean and variance estimated from the sample, corrected statistic).
// Emits a header with the alpha = 0.05 critical value over a grid of sample
// sizes; runtime lookup interpolates in log n. Run at build time by CMake.

#define JFDL_AD_TABLE_GENERATOR
#include "jfdl/normality.hpp"
#include "jfdl/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <vector>

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: gen_ad_table <output-header>\n");
        return 2;
    }

    const int grid[] = {8, 12, 20, 35, 60, 100, 200, 500, 1000, 2000, 4000};
    const int n_grid = static_cast<int>(sizeof(grid) / sizeof(grid[0]));
    std::vector<double> crit(static_cast<size_t>(n_grid));

    jfdl::Rng rng(0x5eedad7ab1e0001ull);
    for (int gi = 0; gi < n_grid; ++gi) {
        int n = grid[gi];
        int trials = n <= 100 ? 150000 : n <= 500 ? 80000 : n <= 2000 ? 40000 : 25000;
        std::vector<double> stats(static_cast<size_t>(trials));
        std::vector<double> sample(static_cast<size_t>(n));
        for (int t = 0; t < trials; ++t) {
            for (int i = 0; i < n; ++i) sample[static_cast<size_t>(i)] = rng.normal();
            std::sort(sample.begin(), sample.end());
            stats[static_cast<size_t>(t)] = jfdl::anderson_darling_statistic(sample);
        }
        std::sort(stats.begin(), stats.end());
        // 95th percentile with linear interpolation between order statistics.
        double pos = 0.95 * (trials - 1);
        size_t lo = static_cast<size_t>(pos);
        double frac = pos - static_cast<double>(lo);
        crit[static_cast<size_t>(gi)] =
            (1.0 - frac) * stats[lo] + frac * stats[std::min(lo + 1, stats.size() - 1)];
        std::fprintf(stderr, "gen_ad_table: n=%d crit=%.4f (%d trials)\n", n,
                     crit[static_cast<size_t>(gi)], trials);
    }

    std::ofstream out(argv[1]);
    if (!out) {
        std::fprintf(stderr, "gen_ad_table: cannot write %s\n", argv[1]);
        return 1;
    }
    out << "// Generated by gen_ad_table; do not edit.\n";
    out << "#ifndef JFDL_GENERATED_AD_CRITICAL_TABLE_HPP\n";
    out << "#define JFDL_GENERATED_AD_CRITICAL_TABLE_HPP\n\n";
    out << "namespace jfdl::generated {\n\n";
    out << "inline constexpr int kAdTableSize = " << n_grid << ";\n";
    out << "inline constexpr int kAdTableN[] = {";
    for (int i = 0; i < n_grid; ++i) out << (i ? ", " : "") << grid[i];
    out << "};\n";
    out << "inline constexpr double kAdTableCrit005[] = {";
    char buf[32];
    for (int i = 0; i < n_grid; ++i) {
        std::snprintf(buf, sizeof(buf), "%.6f", crit[static_cast<size_t>(i)]);
        out << (i ? ", " : "") << buf;
    }
    out << "};\n\n";
    out << "} // namespace jfdl::generated\n\n";
    out << "#endif\n";
    return 0;
}
