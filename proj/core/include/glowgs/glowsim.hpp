#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glowgs/gauss.hpp"
#include "glowgs/image.hpp"
#include "glowgs/rng.hpp"

namespace glowgs {

struct Emitter {
    Vec3 position = Vec3::Zero();
    double intensity = 1.0;  // peak value of the emitter's glow layer
    Vec3 color = Vec3::Ones();
};

/// Textured parallelogram: points origin + s * edge_u + t * edge_v for s, t in [0, 1].
struct Surface {
    Vec3 origin = Vec3::Zero();
    Vec3 edge_u = Vec3::UnitX();
    Vec3 edge_v = Vec3::UnitY();
    std::string texture = "flat";  // flat | checker | stripes | bricks | noise | tiles
    Vec3 albedo = Vec3::Constant(0.5);
    double texture_scale = 4.0;  // pattern repeats per unit of (s, t)
};

/// Generalized-Gaussian radial profile k(r) = exp(-(r / sigma)^q), sigma = radius / 3.
struct ApsfParams {
    int radius_px = 12;
    double q = 1.2;
};

/// Orbit of cameras looking at `target`.
struct CameraRig {
    Vec3 target = Vec3::Zero();
    Vec3 up = Vec3::UnitY();
    double radius = 4.0;
    double height = 0.5;     // camera height above target along `up`
    double arc_deg = 80.0;   // total horizontal span of the orbit
    double fov_deg = 60.0;
    int width = 96;
    int height_px = 64;
};

struct GlowSceneSpec {
    std::string name = "scene";
    std::vector<Emitter> emitters;
    std::vector<Surface> surfaces;
    ApsfParams apsf;
    double ambient = 0.08;
    double irradiance_gain = 0.15;  // emitter irradiance = gain * intensity * color / d^2
    std::uint64_t seed = 0;
    CameraRig rig;

    /// Throws InvalidInput for non-positive intensities, radius < 1 or q outside (0.5, 4].
    void validate() const;
};

struct GlowMask {
    Mask mask;
    double threshold_frac = 0.10;
};

/// Peak-normalized APSF kernel of side 2 * radius + 1.
struct ApsfKernel {
    int radius = 0;
    double sigma = 0.0;
    double q = 0.0;
    std::vector<double> values;

    double at(int dx, int dy) const {
        return values[static_cast<std::size_t>(dy + radius) * (2 * radius + 1) + static_cast<std::size_t>(dx + radius)];
    }
    /// Radius at which the profile falls to `level` (0 < level <= 1).
    double radius_at_level(double level) const;
};

ApsfKernel apsf_kernel(int radius, double q);

/// The emitter-free part of the reference image (shaded surfaces).
Image render_surfaces(const GlowSceneSpec& spec, const Camera& cam);

/// Glow layer of one emitter: APSF-convolved point splat, single channel, peak-scaled by intensity.
/// Zero when the emitter is off-screen or occluded.
Image render_emitter_layer(const GlowSceneSpec& spec, std::size_t emitter, const Camera& cam);

/// Surfaces plus colored glow layers, clamped to [0, 1].
Image render_reference(const GlowSceneSpec& spec, const Camera& cam);

/// Union over emitters of pixels at or above threshold_frac times that emitter layer's peak.
GlowMask glow_mask(const GlowSceneSpec& spec, const Camera& cam, double threshold_frac = 0.10);

/// Orbit cameras at the given arc fractions in [0, 1]; `height_offset` shifts them along `up`.
std::vector<Camera> orbit_cameras(const CameraRig& rig, const std::vector<double>& fractions,
                                  double height_offset = 0.0);

/// Disjoint camera sets for training, evaluation and candidate generation.
struct PoseSplit {
    std::vector<Camera> train;
    std::vector<Camera> test;
    std::vector<Camera> candidates;
};

struct PoseSplitConfig {
    int train = 6;
    int test = 6;
    int candidates = 24;
    double test_height_offset = 0.0;
    double candidate_height_jitter = 0.15;
};

/// Training views sit at evenly spaced arc fractions, test views halfway between training
/// neighbours' fraction grid, candidates at random fractions and heights drawn from `rng`.
PoseSplit make_pose_split(const CameraRig& rig, const PoseSplitConfig& cfg, Rng& rng);

/// Built-in night scenes used by the benchmark suite (ids 0, 1, 2).
GlowSceneSpec preset_scene(int id);
int preset_scene_count();

/// Largest distance between any two camera centers; the scale used for pose perturbation.
double scene_extent(const std::vector<Camera>& cams);

}  // namespace glowgs
