#ifndef JFDL_SAMPLER_HPP
#define JFDL_SAMPLER_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "jfdl/dataset.hpp"
#include "jfdl/errors.hpp"
#include "jfdl/net.hpp"
#include "jfdl/rng.hpp"
#include "jfdl/twosample.hpp"
#include "jfdl/ve.hpp"

namespace jfdl {

struct SamplePlan {
    int steps = 1;               // 1 or 2
    double omega = 1.0;
    int cls = -1;                // data class, or -1 for a random class per sample
    int n = 1000;
    uint64_t seed = 0;
    double intermediate_sigma = -1.0; // 2-step only; < 0 means 0.4 * sigma_max

    void validate(const VEScheme& scheme) const {
        if (steps != 1 && steps != 2) throw ConfigError("SamplePlan: steps must be 1 or 2");
        if (omega < 1.0) throw ConfigError("SamplePlan: omega must be >= 1");
        if (n < 1) throw ConfigError("SamplePlan: n must be >= 1");
        if (intermediate_sigma >= scheme.sigma_max)
            throw ConfigError("SamplePlan: intermediate_sigma must be < sigma_max");
    }
};

/// Guided consistency sampling. One step evaluates G(sigma_max z, 1, c, w);
/// two steps re-noisify the first output to the intermediate level and denoise
/// again with the same omega. Deterministic under a fixed plan.
inline std::vector<LabeledPoint2D> sample(const Net& net, const ModelParams& params,
                                          const VEScheme& scheme, const SamplePlan& plan) {
    plan.validate(scheme);
    const int data_classes = net.arch().null_class();
    if (plan.cls >= data_classes) throw ConfigError("SamplePlan: class out of range");
    std::optional<double> omega;
    if (net.arch().guidance_embed) {
        omega = plan.omega;
    } else if (plan.omega != 1.0) {
        throw CapabilityError("sample: omega != 1 requires a guidance-tuned model");
    }
    double sigma_mid = plan.intermediate_sigma < 0.0 ? 0.4 * scheme.sigma_max
                                                     : plan.intermediate_sigma;

    Rng rng = substream(plan.seed, "sampler");
    std::vector<LabeledPoint2D> out(static_cast<size_t>(plan.n));
    for (int i = 0; i < plan.n; ++i) {
        int cls = plan.cls >= 0 ? plan.cls : static_cast<int>(rng.below(static_cast<uint64_t>(data_classes)));
        Vec2 z{rng.normal(), rng.normal()};
        Vec2 x = net.forward(params.values, scheme.sigma_max * z, 1.0, cls, omega);
        if (plan.steps == 2 && sigma_mid > 0.0) {
            Vec2 z2{rng.normal(), rng.normal()};
            Vec2 x_mid = x + sigma_mid * z2;
            x = net.forward(params.values, x_mid, scheme.t_of_sigma(sigma_mid), cls, omega);
        }
        out[static_cast<size_t>(i)] = {x, cls};
    }
    return out;
}

struct QualityReport {
    double energy_distance_to_class = 0.0;
    double mmd_rbf = 0.0;
    double sample_variance = 0.0;
};

/// 2-D stand-in for FID: energy distance and RBF-MMD against a reference set,
/// plus the sample covariance trace.
inline QualityReport quality(std::span<const Vec2> samples, std::span<const Vec2> reference) {
    if (samples.empty() || reference.empty()) throw DomainError("quality: empty sample set");
    QualityReport q;
    q.energy_distance_to_class = energy_distance(samples, reference);
    q.mmd_rbf = jfdl::mmd_rbf(samples, reference);
    q.sample_variance = sample_variance(samples);
    return q;
}

inline std::vector<Vec2> points_of(const std::vector<LabeledPoint2D>& data, int cls = -1) {
    std::vector<Vec2> pts;
    for (const auto& p : data)
        if (cls < 0 || p.label == cls) pts.push_back(p.x);
    return pts;
}

} // namespace jfdl

#endif
