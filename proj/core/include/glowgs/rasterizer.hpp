#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "glowgs/gauss.hpp"
#include "glowgs/image.hpp"

namespace glowgs {

struct RasterSettings {
    ProjectionSettings projection;
    int tile_size = 16;
    double min_transmittance = 1e-4;
};

/// Per-Gaussian state saved by the forward pass.
struct SplatInfo {
    bool visible = false;
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    Vec3 conic = Vec3::Zero();  // (a, b, c) of the inverse covariance
    double depth = 0.0;
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
    Vec3 view_offset = Vec3::Zero();  // mean - camera center
};

struct RasterContext {
    Camera camera;
    Vec3 background = Vec3::Zero();
    RasterSettings settings;
    std::size_t num_gaussians = 0;
    std::vector<SplatInfo> splats;
    int tiles_x = 0;
    int tiles_y = 0;
    std::vector<std::vector<std::uint32_t>> tile_lists;  // front-to-back ids per tile
    std::vector<std::uint32_t> n_contrib;                // per pixel, including the terminating splat
    std::vector<double> final_transmittance;             // per pixel
};

/// Forward result. `image` = blend + (1 - alpha) * background.
struct RenderOutput {
    Image image;
    Image alpha;  // single channel
    RasterContext ctx;
};

struct GaussianGrad {
    Vec3 mean = Vec3::Zero();
    Vec4 quat = Vec4::Zero();
    Vec3 log_scale = Vec3::Zero();
    double opacity_logit = 0.0;
    std::vector<double> sh;
};

struct SceneGrads {
    std::vector<GaussianGrad> gaussians;
    /// |dL/d mean2d| per Gaussian, the screen-space signal used by densification.
    std::vector<double> screen_grad_norm;
};

RenderOutput rasterize(std::span<const Gaussian3D> scene, const Camera& cam,
                       const Vec3& background = Vec3::Zero(), const RasterSettings& settings = {});

/// Reverse mode of `rasterize`. Throws InvalidInput if `scene` or `grad_image` does not
/// match the forward pass recorded in `out`.
SceneGrads rasterize_backward(const RenderOutput& out, std::span<const Gaussian3D> scene,
                              const Image& grad_image);

}  // namespace glowgs
