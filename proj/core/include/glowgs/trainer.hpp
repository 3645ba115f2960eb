#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "glowgs/descriptor.hpp"
#include "glowgs/featbank.hpp"
#include "glowgs/gauss.hpp"
#include "glowgs/image.hpp"
#include "glowgs/rasterizer.hpp"
#include "glowgs/rng.hpp"

namespace glowgs {

/// Adam step sizes per parameter group. Means decay exponentially from `mean` to `mean_final`.
struct LearningRates {
    double mean = 1.6e-3;
    double mean_final = 1.6e-5;
    double quat = 1e-3;
    double log_scale = 5e-3;
    double opacity = 5e-2;
    double sh_dc = 2.5e-3;
    double sh_rest = 1.25e-4;
};

struct DensifyConfig {
    int start_iter = 100;
    int stop_iter = 1500;
    int every = 100;
    double grad_threshold = 2e-4;  // mean screen-space gradient norm, pixel units
    double dense_frac = 0.01;      // clone below, split above this fraction of the scene extent
    double prune_opacity = 0.005;
    double split_factor = 1.6;
    std::size_t max_gaussians = 20000;
};

struct TrainConfig {
    double lambda = 0.01;
    int iters = 1000;
    int semantic_every = 10;
    double perturb_rot_deg = 2.0;
    double perturb_trans_frac = 0.01;
    LearningRates lr;
    DensifyConfig densify;
    std::uint64_t seed = 0;
    double bank_threshold = 1.5;
    int crop = 256;
    bool semantic_enabled = true;
    Vec3 background = Vec3::Zero();
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-15;

    /// Throws InvalidInput when lambda is outside [0, 1], semantic_every < 1 or a magnitude is negative.
    void validate() const;
};

struct PosedImage {
    Camera camera;
    Image image;
};

struct TrainRecord {
    int iter = 0;
    double l_ori = 0.0;
    std::optional<double> semantic;
    double total = 0.0;
    std::size_t gaussians = 0;
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
    double elapsed_ms = 0.0;
};

struct TrainLog {
    std::vector<TrainRecord> records;
    /// One JSON object per line.
    std::string to_jsonl() const;
};

struct TrainResult {
    std::vector<Gaussian3D> scene;
    TrainLog log;
};

/// Rotates the camera about its center by a random axis and an angle drawn from
/// U(0, perturb_rot_deg), then moves the center by a uniform offset inside a ball of radius
/// perturb_trans_frac * extent.
Camera perturb_pose(const Camera& cam, double rot_deg, double trans_frac, double extent, Rng& rng);

struct DensifyStats {
    std::vector<double> grad_sum;
    std::vector<std::uint32_t> visible_count;

    void reset(std::size_t n);
};

struct DensifyOutcome {
    std::vector<Gaussian3D> scene;
    /// For each output Gaussian, the input index it survives from, or -1 when newly created.
    std::vector<std::int64_t> origin;
    std::size_t cloned = 0;
    std::size_t split = 0;
    std::size_t pruned = 0;
};

DensifyOutcome densify_and_prune(const std::vector<Gaussian3D>& scene, const DensifyStats& stats,
                                 const DensifyConfig& cfg, double extent, Rng& rng);

struct InitConfig {
    std::size_t count = 2000;
    double depth_min = 2.0;
    double depth_max = 7.0;
    double opacity = 0.1;
    int sh_degree = 0;
};

/// Random Gaussians inside the union of the training frustums, colored from the images.
std::vector<Gaussian3D> init_scene(const std::vector<PosedImage>& views, const InitConfig& cfg, Rng& rng);

using ProgressFn = std::function<void(const TrainRecord&)>;

/// Optimizes `scene0` against `views`. Each iteration renders one random training view; every
/// `semantic_every` iterations a perturbed pose is also rendered, upscaled to hold a crop of
/// `cfg.crop` pixels, described and compared with `bank`. The loss is
/// lambda * L_ori + (1 - lambda) * semantic; iterations without a semantic render use L_ori alone.
/// The semantic branch draws from its own random stream, so lambda = 1 leaves the trajectory
/// identical to a run with the branch disabled.
TrainResult train(std::vector<Gaussian3D> scene0, const std::vector<PosedImage>& views, const FeatureBank* bank,
                  const TrainConfig& cfg, const BuiltinDescriptor& extractor = BuiltinDescriptor(),
                  const ProgressFn& progress = {});

/// Full composite loss and its parameter gradients for one perturbed-pose render, exposed for testing.
struct SemanticStep {
    double value = 0.0;
    SceneGrads grads;
};

SemanticStep semantic_step(std::span<const Gaussian3D> scene, const Camera& cam, const PixelRect& crop,
                           const FeatureBank& bank, const BuiltinDescriptor& extractor, const Vec3& background);

/// Renders `cam`, upscaled so that its short side is at least `min_side`.
Image render_for_extractor(std::span<const Gaussian3D> scene, const Camera& cam, int min_side, const Vec3& background);

}  // namespace glowgs
