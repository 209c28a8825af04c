#ifndef JFDL_DATASET_HPP
#define JFDL_DATASET_HPP

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "jfdl/errors.hpp"
#include "jfdl/rng.hpp"
#include "jfdl/vec2.hpp"

namespace jfdl {

struct LabeledPoint2D {
    Vec2 x;
    int label = 0;
};

enum class DatasetKind { Spiral, Circle, Blobs };

inline const char* to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::Spiral: return "spiral";
        case DatasetKind::Circle: return "circle";
        case DatasetKind::Blobs: return "blobs";
    }
    return "?";
}

inline DatasetKind dataset_kind_from(const std::string& name) {
    if (name == "spiral") return DatasetKind::Spiral;
    if (name == "circle") return DatasetKind::Circle;
    if (name == "blobs") return DatasetKind::Blobs;
    throw ConfigError("unknown dataset kind: " + name);
}

inline int num_classes(DatasetKind k) { return k == DatasetKind::Blobs ? 4 : 3; }

/// Per-dataset normalization constant (RMS per coordinate of the clean data).
inline double sigma_data(DatasetKind k) {
    switch (k) {
        case DatasetKind::Spiral: return 1.85;
        case DatasetKind::Circle: return 1.53;
        case DatasetKind::Blobs: return 2.0;
    }
    return 1.0;
}

/// Default coordinate/radius jitter of each recipe.
inline double default_noise_sigma(DatasetKind k) {
    switch (k) {
        case DatasetKind::Spiral: return 0.05;
        case DatasetKind::Circle: return 0.1;
        case DatasetKind::Blobs: return 0.3;
    }
    return 0.0;
}

struct DatasetSpec {
    DatasetKind kind = DatasetKind::Blobs;
    int n_samples = 10000;
    double noise_sigma = 0.3;
    double sigma_data = 2.0;
    uint64_t seed = 0;

    static DatasetSpec defaults(DatasetKind k, int n, uint64_t seed) {
        DatasetSpec s;
        s.kind = k;
        s.n_samples = n;
        s.noise_sigma = default_noise_sigma(k);
        s.sigma_data = jfdl::sigma_data(k);
        s.seed = seed;
        return s;
    }

    void validate() const {
        if (n_samples <= 0) throw ConfigError("DatasetSpec: n_samples must be > 0");
        if (noise_sigma < 0.0) throw ConfigError("DatasetSpec: noise_sigma must be >= 0");
        if (sigma_data <= 0.0) throw ConfigError("DatasetSpec: sigma_data must be > 0");
    }

    int num_classes() const { return jfdl::num_classes(kind); }
};

namespace detail {

// Near-equal split: floor(n/k) each, remainder goes to the lowest labels.
inline std::vector<int> per_class_counts(int n, int k) {
    std::vector<int> counts(static_cast<size_t>(k), n / k);
    for (int c = 0; c < n % k; ++c) counts[static_cast<size_t>(c)]++;
    return counts;
}
} // namespace detail

/// Generates the requested toy distribution. Pure function of the spec:
/// identical specs produce bitwise-identical samples.
inline std::vector<LabeledPoint2D> generate(const DatasetSpec& spec) {
    spec.validate();
    Rng rng = substream(spec.seed, "toy-data");
    std::vector<LabeledPoint2D> out;
    out.reserve(static_cast<size_t>(spec.n_samples));
    const auto counts = detail::per_class_counts(spec.n_samples, spec.num_classes());

    switch (spec.kind) {
        case DatasetKind::Spiral: {
            // r = 0.5 + 0.3 * theta, theta in [0, 4pi], arm k rotated by 2pi*k/3,
            // Gaussian jitter on both coordinates.
            for (int c = 0; c < 3; ++c) {
                double arm = detail::kTwoPi * c / 3.0;
                for (int i = 0; i < counts[static_cast<size_t>(c)]; ++i) {
                    double theta = rng.uniform(0.0, 2.0 * detail::kTwoPi);
                    double r = 0.5 + 0.3 * theta;
                    Vec2 p{r * std::cos(theta + arm), r * std::sin(theta + arm)};
                    p.x += rng.normal(0.0, spec.noise_sigma);
                    p.y += rng.normal(0.0, spec.noise_sigma);
                    out.push_back({p, c});
                }
            }
            break;
        }
        case DatasetKind::Circle: {
            // Concentric rings of radius 1, 2, 3; jitter applied to the radius.
            for (int c = 0; c < 3; ++c) {
                double ring = 1.0 + c;
                for (int i = 0; i < counts[static_cast<size_t>(c)]; ++i) {
                    double theta = rng.uniform(0.0, detail::kTwoPi);
                    double r = ring + rng.normal(0.0, spec.noise_sigma);
                    out.push_back({{r * std::cos(theta), r * std::sin(theta)}, c});
                }
            }
            break;
        }
        case DatasetKind::Blobs: {
            static constexpr Vec2 kCenters[4] = {{-2.0, -2.0}, {2.0, -2.0}, {2.0, 2.0}, {-2.0, 2.0}};
            for (int c = 0; c < 4; ++c) {
                for (int i = 0; i < counts[static_cast<size_t>(c)]; ++i) {
                    Vec2 p = kCenters[c];
                    p.x += rng.normal(0.0, spec.noise_sigma);
                    p.y += rng.normal(0.0, spec.noise_sigma);
                    out.push_back({p, c});
                }
            }
            break;
        }
    }
    return out;
}

inline Vec2 blob_center(int label) {
    static constexpr Vec2 kCenters[4] = {{-2.0, -2.0}, {2.0, -2.0}, {2.0, 2.0}, {-2.0, 2.0}};
    if (label < 0 || label > 3) throw DomainError("blob_center: label out of range");
    return kCenters[label];
}

// ---------------------------------------------------------------------------
// CSV persistence: header "x0,x1,label", one row per point. %.17g round-trips
// doubles exactly.
// ---------------------------------------------------------------------------

inline void write_dataset_csv(const std::string& path, const std::vector<LabeledPoint2D>& data) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot open for writing: " + path);
    f << "x0,x1,label\n";
    char buf[80];
    for (const auto& p : data) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d\n", p.x.x, p.x.y, p.label);
        f << buf;
    }
}

inline std::vector<LabeledPoint2D> read_dataset_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open dataset: " + path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("x0,x1,label", 0) != 0)
        throw ConfigError("bad dataset header in " + path);
    std::vector<LabeledPoint2D> out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        LabeledPoint2D p;
        std::istringstream ss(line);
        char comma = 0;
        if (!(ss >> p.x.x >> comma >> p.x.y >> comma >> p.label))
            throw ConfigError("bad dataset row in " + path + ": " + line);
        if (!p.x.finite()) throw NumericError("non-finite coordinate in " + path);
        out.push_back(p);
    }
    if (out.empty()) throw ConfigError("empty dataset: " + path);
    return out;
}

/// Highest label + 1; datasets are expected to use contiguous 0-based labels.
inline int dataset_num_classes(const std::vector<LabeledPoint2D>& data) {
    int hi = 0;
    for (const auto& p : data) {
        if (p.label < 0) throw DomainError("negative class label");
        if (p.label > hi) hi = p.label;
    }
    return hi + 1;
}

} // namespace jfdl

#endif
