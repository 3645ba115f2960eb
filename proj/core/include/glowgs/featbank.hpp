#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glowgs/descriptor.hpp"
#include "glowgs/image.hpp"
#include "glowgs/rng.hpp"

namespace glowgs {

/// Patch features pooled from accepted views. Immutable once built.
struct FeatureBank {
    int dim = 0;
    std::string extractor;
    std::vector<std::uint32_t> source_view;
    std::vector<std::uint32_t> patch_index;
    std::vector<float> data;  // size() * dim

    std::size_t size() const noexcept { return source_view.size(); }
    bool empty() const noexcept { return source_view.empty(); }
    std::span<const float> record(std::size_t s) const {
        return {data.data() + s * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
    void append(std::uint32_t view, std::uint32_t patch, std::span<const double> vec);
};

struct VerificationReport {
    double distance = 0.0;  // mean of frame_distances for the last round
    double threshold = 0.0;
    bool accepted = false;
    int rounds = 0;
    std::vector<double> frame_distances;
    std::vector<double> round_distances;  // distance of every attempted round
};

/// Supplies a fresh candidate set for round `round` (2, 3, ...). Returning nullopt stops retrying.
using CandidateSource = std::function<std::optional<std::vector<FeatureSet>>(int round)>;

/// Mean L2 distance between the global vector of `ref` and those of `candidates`.
double view_distance(const FeatureSet& ref, std::span<const FeatureSet> candidates);

/// Accepts when the candidate distance is within `threshold`; otherwise asks `regen` for a
/// replacement set, up to `max_rounds` rounds in total. Exhaustion yields accepted = false.
VerificationReport verify(const FeatureSet& ref, std::vector<FeatureSet> candidates, double threshold,
                          const CandidateSource& regen, int max_rounds);

/// Summary of distances for pairs known to match versus pairs known not to.
struct ThresholdCalibration {
    double same_mean = 0.0;
    double same_max = 0.0;
    double noise_mean = 0.0;
    double noise_min = 0.0;
    bool separable = false;
    double threshold = 0.0;  // midpoint between same_max and noise_min
};

ThresholdCalibration calibrate_threshold(std::span<const double> same_scene,
                                         std::span<const double> noise);

/// Describes `crops_per_view` random crops of each view and appends every patch feature.
/// Views whose short side is below the extractor crop are bilinearly upscaled first.
FeatureBank build_bank(std::span<const Image> views, const FeatureExtractor& extractor,
                       int crops_per_view, Rng& rng);

/// Upscales (if needed) so the image can hold one extractor crop.
Image fit_for_extractor(const Image& view, int crop_size);

struct Match {
    std::size_t index = 0;
    double distance = 0.0;
};

/// Exact nearest record under L2; ties go to the lowest index.
Match retrieve(const FeatureBank& bank, std::span<const double> query);

struct SemanticResult {
    double value = 0.0;
    std::vector<std::size_t> matches;
    std::vector<double> distances;
    std::vector<double> grad_patches;  // d value / d patch features, matches held fixed
};

/// Mean over patches of the L2 distance to each patch's nearest bank record.
SemanticResult semantic_term(const FeatureSet& rendered, const FeatureBank& bank);

}  // namespace glowgs
