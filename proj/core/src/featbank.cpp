#include "glowgs/featbank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "glowgs/error.hpp"

namespace glowgs {

void FeatureBank::append(std::uint32_t view, std::uint32_t patch, std::span<const double> vec) {
    if (static_cast<int>(vec.size()) != dim) throw InvalidInput("feature dimension does not match bank");
    source_view.push_back(view);
    patch_index.push_back(patch);
    for (double v : vec) data.push_back(static_cast<float>(v));
}

double view_distance(const FeatureSet& ref, std::span<const FeatureSet> candidates) {
    if (candidates.empty()) throw InvalidInput("view_distance needs at least one candidate");
    double total = 0.0;
    for (const FeatureSet& c : candidates) {
        if (c.global.size() != ref.global.size()) throw InvalidInput("global feature dimensions differ");
        double d2 = 0.0;
        for (std::size_t i = 0; i < ref.global.size(); ++i) {
            const double d = ref.global[i] - c.global[i];
            d2 += d * d;
        }
        total += std::sqrt(d2);
    }
    return total / static_cast<double>(candidates.size());
}

VerificationReport verify(const FeatureSet& ref, std::vector<FeatureSet> candidates, double threshold,
                          const CandidateSource& regen, int max_rounds) {
    if (!(threshold > 0.0)) throw InvalidInput("verification threshold must be positive");
    if (max_rounds < 1) throw InvalidInput("max_rounds must be at least 1");
    VerificationReport report;
    report.threshold = threshold;
    for (int round = 1; round <= max_rounds; ++round) {
        if (round > 1) {
            auto next = regen ? regen(round) : std::nullopt;
            if (!next) break;
            candidates = std::move(*next);  // regenerated frames replace the previous set
        }
        report.rounds = round;
        report.frame_distances.clear();
        for (const FeatureSet& c : candidates) {
            report.frame_distances.push_back(view_distance(ref, std::span<const FeatureSet>(&c, 1)));
        }
        report.distance = view_distance(ref, candidates);
        report.round_distances.push_back(report.distance);
        report.accepted = report.distance <= threshold;
        if (report.accepted) break;
    }
    return report;
}

ThresholdCalibration calibrate_threshold(std::span<const double> same_scene, std::span<const double> noise) {
    if (same_scene.empty() || noise.empty()) throw InvalidInput("calibration needs both distance sets");
    ThresholdCalibration c;
    double s = 0.0;
    for (double d : same_scene) s += d;
    c.same_mean = s / static_cast<double>(same_scene.size());
    c.same_max = *std::max_element(same_scene.begin(), same_scene.end());
    double n = 0.0;
    for (double d : noise) n += d;
    c.noise_mean = n / static_cast<double>(noise.size());
    c.noise_min = *std::min_element(noise.begin(), noise.end());
    c.separable = c.same_max < c.noise_min;
    c.threshold = 0.5 * (c.same_max + c.noise_min);
    return c;
}

Image fit_for_extractor(const Image& view, int crop_size) {
    const auto [w, h] = upscaled_size(view.width, view.height, crop_size);
    if (w == view.width && h == view.height) return view;
    return resize_bilinear(view, w, h);
}

FeatureBank build_bank(std::span<const Image> views, const FeatureExtractor& extractor,
                       int crops_per_view, Rng& rng) {
    if (views.empty()) throw InvalidInput("build_bank needs at least one view");
    if (crops_per_view < 1) throw InvalidInput("crops_per_view must be at least 1");
    FeatureBank bank;
    bank.dim = extractor.dim();
    bank.extractor = extractor.name();
    const int cs = extractor.crop_size();
    for (std::size_t v = 0; v < views.size(); ++v) {
        const Image fitted = fit_for_extractor(views[v], cs);
        for (int k = 0; k < crops_per_view; ++k) {
            PixelRect rect{static_cast<int>(rng.below(static_cast<std::uint64_t>(fitted.width - cs + 1))),
                           static_cast<int>(rng.below(static_cast<std::uint64_t>(fitted.height - cs + 1))),
                           cs, cs};
            const FeatureSet fs = extractor.describe(fitted, rect);
            for (std::size_t p = 0; p < fs.patch_count(); ++p) {
                bank.append(static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(p), fs.patch(p));
            }
        }
    }
    return bank;
}

Match retrieve(const FeatureBank& bank, std::span<const double> query) {
    if (bank.empty()) throw InvalidInput("retrieve from an empty bank");
    if (static_cast<int>(query.size()) != bank.dim) {
        throw InvalidInput("query dimension " + std::to_string(query.size()) + " does not match bank dimension " +
                           std::to_string(bank.dim));
    }
    const std::size_t dim = query.size();
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    const float* rec = bank.data.data();
    for (std::size_t s = 0; s < bank.size(); ++s, rec += dim) {
        // Partial sums only grow, so abandoning once past the best keeps the scan exact.
        double d2 = 0.0;
        std::size_t i = 0;
        for (; i < dim; ++i) {
            const double d = query[i] - static_cast<double>(rec[i]);
            d2 += d * d;
            if (d2 > best) break;
        }
        if (i == dim && d2 < best) {
            best = d2;
            best_index = s;
        }
    }
    return {best_index, std::sqrt(best)};
}

SemanticResult semantic_term(const FeatureSet& rendered, const FeatureBank& bank) {
    if (bank.empty()) throw InvalidInput("semantic term needs a non-empty bank");
    if (rendered.dim != bank.dim) throw InvalidInput("rendered feature dimension does not match bank");
    const std::size_t np = rendered.patch_count();
    if (np == 0) throw InvalidInput("rendered feature set has no patches");
    SemanticResult r;
    r.matches.resize(np);
    r.distances.resize(np);
    r.grad_patches.assign(rendered.patches.size(), 0.0);
    const double inv_p = 1.0 / static_cast<double>(np);
    const std::size_t dim = static_cast<std::size_t>(rendered.dim);
    for (std::size_t p = 0; p < np; ++p) {
        const auto q = rendered.patch(p);
        const Match m = retrieve(bank, q);
        r.matches[p] = m.index;
        r.distances[p] = m.distance;
        r.value += m.distance;
        if (m.distance > 0.0) {
            const auto b = bank.record(m.index);
            for (std::size_t i = 0; i < dim; ++i) {
                r.grad_patches[p * dim + i] = (q[i] - static_cast<double>(b[i])) / m.distance * inv_p;
            }
        }
    }
    r.value *= inv_p;
    return r;
}

}  // namespace glowgs
