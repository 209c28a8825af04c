#ifndef JFDL_NORMALITY_HPP
#define JFDL_NORMALITY_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "jfdl/errors.hpp"
#include "jfdl/normal.hpp"
#include "jfdl/rng.hpp"

namespace jfdl {

enum class NormalityTest { ShapiroWilk, AndersonDarling, KolmogorovSmirnov };

inline const char* to_string(NormalityTest t) {
    switch (t) {
        case NormalityTest::ShapiroWilk: return "shapiro_wilk";
        case NormalityTest::AndersonDarling: return "anderson_darling";
        case NormalityTest::KolmogorovSmirnov: return "kolmogorov_smirnov";
    }
    return "?";
}

struct NormalityVerdict {
    NormalityTest test = NormalityTest::ShapiroWilk;
    double statistic = 0.0;
    double p_or_critical = 0.0; // p-value for SW/KS, critical value for AD
    bool pass = false;
    double alpha = 0.05;
    int n = 0;
};

namespace detail {

inline void require_spread(const std::vector<double>& sorted, const char* who) {
    if (sorted.size() < 2 || sorted.front() == sorted.back())
        throw DomainError(std::string(who) + ": sample has zero variance");
}

inline std::pair<double, double> mean_and_sd(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    return {mean, sd};
}

} // namespace detail

// ---------------------------------------------------------------------------
// Shapiro-Wilk, Royston's AS R94 approximation (valid for 3 <= n <= 5000).
// Coefficients from the order-statistic expectations via Blom scores plus the
// published polynomial corrections; p-value from the normalizing transform of
// ln(1-W) (n >= 12) or its small-sample variants.
// ---------------------------------------------------------------------------

/// W statistic on a sorted sample.
inline double shapiro_wilk_statistic(const std::vector<double>& sorted) {
    const int n = static_cast<int>(sorted.size());
    if (n < 3) throw DomainError("shapiro_wilk: need n >= 3");
    if (n > 5000) throw DomainError("shapiro_wilk: n > 5000 unsupported; subsample first");
    detail::require_spread(sorted, "shapiro_wilk");

    std::vector<double> m(static_cast<size_t>(n));
    double ssumm2 = 0.0;
    for (int i = 0; i < n; ++i) {
        m[static_cast<size_t>(i)] =
            normal_quantile((static_cast<double>(i + 1) - 0.375) / (static_cast<double>(n) + 0.25));
        ssumm2 += m[static_cast<size_t>(i)] * m[static_cast<size_t>(i)];
    }

    std::vector<double> a(static_cast<size_t>(n), 0.0);
    if (n == 3) {
        a[0] = -0.70710678118654752440;
        a[2] = 0.70710678118654752440;
    } else {
        double rsn = 1.0 / std::sqrt(static_cast<double>(n));
        double rm = std::sqrt(ssumm2);
        auto poly5 = [](double u, double c5, double c4, double c3, double c2, double c1) {
            return ((((c5 * u + c4) * u + c3) * u + c2) * u + c1) * u;
        };
        double an = m[static_cast<size_t>(n - 1)] / rm +
                    poly5(rsn, -2.706056, 4.434685, -2.071190, -0.147981, 0.221157);
        double phi;
        if (n > 5) {
            double an1 = m[static_cast<size_t>(n - 2)] / rm +
                         poly5(rsn, -3.582633, 5.682633, -1.752461, -0.293762, 0.042981);
            phi = (ssumm2 - 2.0 * m[static_cast<size_t>(n - 1)] * m[static_cast<size_t>(n - 1)] -
                   2.0 * m[static_cast<size_t>(n - 2)] * m[static_cast<size_t>(n - 2)]) /
                  (1.0 - 2.0 * an * an - 2.0 * an1 * an1);
            a[static_cast<size_t>(n - 1)] = an;
            a[static_cast<size_t>(n - 2)] = an1;
            a[0] = -an;
            a[1] = -an1;
            for (int i = 2; i < n - 2; ++i) a[static_cast<size_t>(i)] = m[static_cast<size_t>(i)] / std::sqrt(phi);
        } else {
            phi = (ssumm2 - 2.0 * m[static_cast<size_t>(n - 1)] * m[static_cast<size_t>(n - 1)]) /
                  (1.0 - 2.0 * an * an);
            a[static_cast<size_t>(n - 1)] = an;
            a[0] = -an;
            for (int i = 1; i < n - 1; ++i) a[static_cast<size_t>(i)] = m[static_cast<size_t>(i)] / std::sqrt(phi);
        }
    }

    double mean = 0.0;
    for (double x : sorted) mean += x;
    mean /= n;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n; ++i) {
        num += a[static_cast<size_t>(i)] * sorted[static_cast<size_t>(i)];
        den += (sorted[static_cast<size_t>(i)] - mean) * (sorted[static_cast<size_t>(i)] - mean);
    }
    double w = num * num / den;
    return std::min(w, 1.0);
}

inline double shapiro_wilk_pvalue(double w, int n) {
    if (n == 3) {
        constexpr double kPi = 3.14159265358979323846;
        double p = 6.0 / kPi * (std::asin(std::sqrt(w)) - std::asin(std::sqrt(0.75)));
        return std::clamp(p, 0.0, 1.0);
    }
    double z;
    if (n <= 11) {
        double g = -2.273 + 0.459 * n;
        double lw = -std::log(g - std::log1p(-w));
        double mu = 0.5440 - 0.39978 * n + 0.025054 * n * n - 0.0006714 * n * n * n;
        double sd = std::exp(1.3822 - 0.77857 * n + 0.062767 * n * n - 0.0020322 * n * n * n);
        z = (lw - mu) / sd;
    } else {
        double lw = std::log1p(-w);
        double y = std::log(static_cast<double>(n));
        double mu = -1.5861 - 0.31082 * y - 0.083751 * y * y + 0.0038915 * y * y * y;
        double sd = std::exp(-0.4803 - 0.082676 * y + 0.0030302 * y * y);
        z = (lw - mu) / sd;
    }
    return normal_cdf(-z);
}

/// Samples larger than 5000 are subsampled (without replacement) with the
/// caller's rng, the suggested maximum size for SW.
inline NormalityVerdict shapiro_wilk(std::vector<double> sample, Rng& rng, double alpha = 0.05) {
    if (sample.size() > 5000) {
        for (size_t i = 0; i < 5000; ++i) {
            size_t j = i + static_cast<size_t>(rng.below(sample.size() - i));
            std::swap(sample[i], sample[j]);
        }
        sample.resize(5000);
    }
    std::sort(sample.begin(), sample.end());
    double w = shapiro_wilk_statistic(sample);
    double p = shapiro_wilk_pvalue(w, static_cast<int>(sample.size()));
    return {NormalityTest::ShapiroWilk, w, p, p > alpha, alpha, static_cast<int>(sample.size())};
}

// ---------------------------------------------------------------------------
// Anderson-Darling against the normal with estimated mean and variance. The
// small-sample correction A*^2 = A^2 (1 + 0.75/n + 2.25/n^2) makes the null
// distribution nearly n-independent; critical values are Monte-Carlo
// calibrated at build time (see tools/gen_ad_table.cpp).
// ---------------------------------------------------------------------------

/// Corrected A*^2 on a sorted sample. Returns +inf when an observation lies so
/// far in a tail that the CDF saturates (certain rejection).
inline double anderson_darling_statistic(const std::vector<double>& sorted) {
    const int n = static_cast<int>(sorted.size());
    if (n < 8) throw DomainError("anderson_darling: need n >= 8");
    detail::require_spread(sorted, "anderson_darling");
    auto [mean, sd] = detail::mean_and_sd(sorted);

    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double zlo = (sorted[static_cast<size_t>(i)] - mean) / sd;
        double zhi = (sorted[static_cast<size_t>(n - 1 - i)] - mean) / sd;
        double l1 = log_normal_cdf(zlo);
        double l2 = log_normal_cdf(-zhi); // ln(1 - Phi(z_hi))
        acc += (2.0 * i + 1.0) * (l1 + l2);
    }
    double a2 = -n - acc / n;
    double nn = static_cast<double>(n);
    return a2 * (1.0 + 0.75 / nn + 2.25 / (nn * nn));
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov of the standardized sample against the standard normal,
// p-value from the asymptotic Kolmogorov distribution. With estimated
// parameters this is conservative (no Lilliefors correction by design).
// ---------------------------------------------------------------------------

inline double kolmogorov_smirnov_statistic(const std::vector<double>& sorted) {
    const int n = static_cast<int>(sorted.size());
    if (n < 8) throw DomainError("kolmogorov_smirnov: need n >= 8");
    detail::require_spread(sorted, "kolmogorov_smirnov");
    auto [mean, sd] = detail::mean_and_sd(sorted);
    double d = 0.0;
    for (int i = 0; i < n; ++i) {
        double f = normal_cdf((sorted[static_cast<size_t>(i)] - mean) / sd);
        d = std::max(d, std::max((i + 1.0) / n - f, f - static_cast<double>(i) / n));
    }
    return d;
}

/// Survival function of the Kolmogorov distribution, Q(lambda) = P(K > lambda).
inline double kolmogorov_q(double lambda) {
    if (lambda < 0.1) return 1.0;
    if (lambda < 1.18) {
        // Jacobi-theta form, accurate where the alternating series is slow.
        double t = std::exp(-1.2337005501361697 / (lambda * lambda)); // pi^2/8
        double cdf = 2.5066282746310002 / lambda *
                     (t + std::pow(t, 9.0) + std::pow(t, 25.0) + std::pow(t, 49.0));
        return std::clamp(1.0 - cdf, 0.0, 1.0);
    }
    double l2 = lambda * lambda;
    double p = 2.0 * (std::exp(-2.0 * l2) - std::exp(-8.0 * l2) + std::exp(-18.0 * l2) -
                      std::exp(-32.0 * l2));
    return std::clamp(p, 0.0, 1.0);
}

inline NormalityVerdict kolmogorov_smirnov(std::vector<double> sample, double alpha = 0.05) {
    std::sort(sample.begin(), sample.end());
    double d = kolmogorov_smirnov_statistic(sample);
    double p = kolmogorov_q(std::sqrt(static_cast<double>(sample.size())) * d);
    return {NormalityTest::KolmogorovSmirnov, d, p, p > alpha, alpha,
            static_cast<int>(sample.size())};
}

} // namespace jfdl

#ifndef JFDL_AD_TABLE_GENERATOR
#include "jfdl_generated/ad_critical_table.hpp"

namespace jfdl {

/// Critical value of the corrected A*^2 at alpha = 0.05, log-interpolated in n
/// over the calibrated grid.
inline double ad_critical_value(int n) {
    const int k = generated::kAdTableSize;
    if (n <= generated::kAdTableN[0]) return generated::kAdTableCrit005[0];
    if (n >= generated::kAdTableN[k - 1]) return generated::kAdTableCrit005[k - 1];
    int i = 0;
    while (generated::kAdTableN[i + 1] < n) ++i;
    double x0 = std::log(static_cast<double>(generated::kAdTableN[i]));
    double x1 = std::log(static_cast<double>(generated::kAdTableN[i + 1]));
    double w = (std::log(static_cast<double>(n)) - x0) / (x1 - x0);
    return (1.0 - w) * generated::kAdTableCrit005[i] + w * generated::kAdTableCrit005[i + 1];
}

inline NormalityVerdict anderson_darling(std::vector<double> sample, double alpha = 0.05) {
    if (alpha != 0.05)
        throw ConfigError("anderson_darling: only alpha = 0.05 is calibrated");
    std::sort(sample.begin(), sample.end());
    double a2 = anderson_darling_statistic(sample);
    double crit = ad_critical_value(static_cast<int>(sample.size()));
    return {NormalityTest::AndersonDarling, a2, crit, a2 < crit, alpha,
            static_cast<int>(sample.size())};
}

} // namespace jfdl
#endif // JFDL_AD_TABLE_GENERATOR

#endif
