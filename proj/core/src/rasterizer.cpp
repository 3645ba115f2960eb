#include "glowgs/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "glowgs/error.hpp"
#include "glowgs/parallel.hpp"

namespace glowgs {

namespace {

struct TileRange {
    int x0, x1, y0, y1;  // inclusive pixel bounds
};

TileRange tile_pixels(const RasterContext& ctx, std::size_t tile) {
    const int ts = ctx.settings.tile_size;
    const int tx = static_cast<int>(tile % static_cast<std::size_t>(ctx.tiles_x));
    const int ty = static_cast<int>(tile / static_cast<std::size_t>(ctx.tiles_x));
    return {tx * ts, std::min((tx + 1) * ts, ctx.camera.width) - 1, ty * ts,
            std::min((ty + 1) * ts, ctx.camera.height) - 1};
}

double splat_power(const SplatInfo& s, double px, double py, double& dx, double& dy) {
    dx = px - s.mean2d.x();
    dy = py - s.mean2d.y();
    return -0.5 * (s.conic[0] * dx * dx + 2.0 * s.conic[1] * dx * dy + s.conic[2] * dy * dy);
}

void bin_splats(RasterContext& ctx) {
    const int ts = ctx.settings.tile_size;
    ctx.tiles_x = (ctx.camera.width + ts - 1) / ts;
    ctx.tiles_y = (ctx.camera.height + ts - 1) / ts;
    ctx.tile_lists.assign(static_cast<std::size_t>(ctx.tiles_x) * ctx.tiles_y, {});

    std::vector<std::uint32_t> order;
    for (std::size_t i = 0; i < ctx.splats.size(); ++i) {
        if (ctx.splats[i].visible) order.push_back(static_cast<std::uint32_t>(i));
    }
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const double da = ctx.splats[a].depth, db = ctx.splats[b].depth;
        return da < db || (da == db && a < b);
    });

    for (std::uint32_t id : order) {
        const SplatInfo& s = ctx.splats[id];
        const double r = footprint_radius(s.cov2d, ctx.settings.projection.cull_sigma);
        const int tx0 = std::max(0, static_cast<int>(std::floor((s.mean2d.x() - r) / ts)));
        const int tx1 = std::min(ctx.tiles_x - 1, static_cast<int>(std::floor((s.mean2d.x() + r) / ts)));
        const int ty0 = std::max(0, static_cast<int>(std::floor((s.mean2d.y() - r) / ts)));
        const int ty1 = std::min(ctx.tiles_y - 1, static_cast<int>(std::floor((s.mean2d.y() + r) / ts)));
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) {
                ctx.tile_lists[static_cast<std::size_t>(ty) * ctx.tiles_x + tx].push_back(id);
            }
        }
    }
}

struct SplatPartial {
    Vec2 mean2d = Vec2::Zero();
    Vec3 conic = Vec3::Zero();
    double opacity = 0.0;
    Vec3 color = Vec3::Zero();
};

}  // namespace

RenderOutput rasterize(std::span<const Gaussian3D> scene, const Camera& cam, const Vec3& background,
                       const RasterSettings& settings) {
    cam.validate();
    RenderOutput out;
    RasterContext& ctx = out.ctx;
    ctx.camera = cam;
    ctx.background = background;
    ctx.settings = settings;
    ctx.num_gaussians = scene.size();
    ctx.splats.resize(scene.size());

    const Vec3 cam_center = cam.center();
    parallel_for(scene.size(), [&](std::size_t i) {
        const Gaussian3D& g = scene[i];
        SplatInfo& s = ctx.splats[i];
        const auto proj = project_gaussian(g, cam, settings.projection);
        if (!proj) return;
        const double det = proj->cov2d.determinant();
        if (!(det > 0.0)) return;
        s.visible = true;
        s.mean2d = proj->mean2d;
        s.cov2d = proj->cov2d;
        s.depth = proj->depth;
        s.conic = Vec3(proj->cov2d(1, 1) / det, -proj->cov2d(0, 1) / det, proj->cov2d(0, 0) / det);
        s.opacity = g.opacity();
        s.view_offset = g.mean - cam_center;
        s.color = sh_color(g.sh, s.view_offset.normalized());
    });

    bin_splats(ctx);

    const std::size_t npix = static_cast<std::size_t>(cam.width) * cam.height;
    out.image = Image(cam.width, cam.height, 3);
    out.alpha = Image(cam.width, cam.height, 1);
    ctx.n_contrib.assign(npix, 0);
    ctx.final_transmittance.assign(npix, 1.0);

    parallel_for(ctx.tile_lists.size(), [&](std::size_t tile) {
        const TileRange tr = tile_pixels(ctx, tile);
        const auto& list = ctx.tile_lists[tile];
        for (int y = tr.y0; y <= tr.y1; ++y) {
            for (int x = tr.x0; x <= tr.x1; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                double t = 1.0;
                Vec3 c = Vec3::Zero();
                std::uint32_t n = 0;
                for (std::uint32_t id : list) {
                    const SplatInfo& s = ctx.splats[id];
                    double dx, dy;
                    const double alpha = s.opacity * std::exp(splat_power(s, px, py, dx, dy));
                    c += (alpha * t) * s.color;
                    t *= 1.0 - alpha;
                    ++n;
                    if (t < settings.min_transmittance) break;
                }
                const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
                ctx.n_contrib[p] = n;
                ctx.final_transmittance[p] = t;
                for (int ch = 0; ch < 3; ++ch) out.image.at(x, y, ch) = c[ch] + t * background[ch];
                out.alpha.at(x, y) = 1.0 - t;
            }
        }
    });
    return out;
}

SceneGrads rasterize_backward(const RenderOutput& out, std::span<const Gaussian3D> scene,
                              const Image& grad_image) {
    const RasterContext& ctx = out.ctx;
    if (scene.size() != ctx.num_gaussians) {
        throw InvalidInput("rasterize_backward: scene has " + std::to_string(scene.size()) +
                           " Gaussians, forward pass recorded " + std::to_string(ctx.num_gaussians));
    }
    if (grad_image.width != ctx.camera.width || grad_image.height != ctx.camera.height ||
        grad_image.channels != 3) {
        throw InvalidInput("rasterize_backward: gradient image shape does not match render");
    }

    const int width = ctx.camera.width;
    std::vector<std::vector<SplatPartial>> partials(ctx.tile_lists.size());

    parallel_for(ctx.tile_lists.size(), [&](std::size_t tile) {
        const auto& list = ctx.tile_lists[tile];
        auto& part = partials[tile];
        part.assign(list.size(), SplatPartial{});
        if (list.empty()) return;
        const TileRange tr = tile_pixels(ctx, tile);
        std::vector<double> trans(list.size() + 1);
        std::vector<double> alphas(list.size());
        std::vector<double> gvals(list.size());
        std::vector<Vec2> deltas(list.size());

        for (int y = tr.y0; y <= tr.y1; ++y) {
            for (int x = tr.x0; x <= tr.x1; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * width + x;
                const std::uint32_t n = ctx.n_contrib[p];
                if (n == 0) continue;
                const Vec3 gpix(grad_image.at(x, y, 0), grad_image.at(x, y, 1), grad_image.at(x, y, 2));
                if (gpix.isZero(0.0)) continue;
                const double px = x + 0.5, py = y + 0.5;

                trans[0] = 1.0;
                for (std::uint32_t k = 0; k < n; ++k) {
                    const SplatInfo& s = ctx.splats[list[k]];
                    double dx, dy;
                    gvals[k] = std::exp(splat_power(s, px, py, dx, dy));
                    deltas[k] = Vec2(dx, dy);
                    alphas[k] = s.opacity * gvals[k];
                    trans[k + 1] = trans[k] * (1.0 - alphas[k]);
                }

                Vec3 behind = ctx.background;
                for (std::uint32_t kk = n; kk-- > 0;) {
                    const SplatInfo& s = ctx.splats[list[kk]];
                    SplatPartial& sp = part[kk];
                    const double a = alphas[kk];
                    const double t = trans[kk];
                    sp.color += (a * t) * gpix;
                    const double g_alpha = t * (s.color - behind).dot(gpix);
                    behind = a * s.color + (1.0 - a) * behind;

                    sp.opacity += g_alpha * gvals[kk];
                    const double g_power = g_alpha * s.opacity * gvals[kk];
                    const double dx = deltas[kk].x(), dy = deltas[kk].y();
                    sp.mean2d.x() += g_power * (s.conic[0] * dx + s.conic[1] * dy);
                    sp.mean2d.y() += g_power * (s.conic[1] * dx + s.conic[2] * dy);
                    sp.conic[0] += g_power * (-0.5 * dx * dx);
                    sp.conic[1] += g_power * (-dx * dy);
                    sp.conic[2] += g_power * (-0.5 * dy * dy);
                }
            }
        }
    });

    // Fixed tile order keeps the reduction independent of the worker count.
    std::vector<SplatPartial> total(scene.size());
    for (std::size_t tile = 0; tile < ctx.tile_lists.size(); ++tile) {
        const auto& list = ctx.tile_lists[tile];
        for (std::size_t k = 0; k < list.size(); ++k) {
            SplatPartial& t = total[list[k]];
            const SplatPartial& sp = partials[tile][k];
            t.mean2d += sp.mean2d;
            t.conic += sp.conic;
            t.opacity += sp.opacity;
            t.color += sp.color;
        }
    }

    SceneGrads grads;
    grads.gaussians.resize(scene.size());
    grads.screen_grad_norm.assign(scene.size(), 0.0);
    parallel_for(scene.size(), [&](std::size_t i) {
        const Gaussian3D& g = scene[i];
        GaussianGrad& out_g = grads.gaussians[i];
        out_g.sh.assign(g.sh.size(), 0.0);
        const SplatInfo& s = ctx.splats[i];
        if (!s.visible) return;
        const SplatPartial& t = total[i];
        grads.screen_grad_norm[i] = t.mean2d.norm();

        // conic = cov2d^-1; dL/dcov = -Q G Q with G the full-matrix conic gradient.
        Mat2 q;
        q << s.conic[0], s.conic[1], s.conic[1], s.conic[2];
        Mat2 gq;
        gq << t.conic[0], 0.5 * t.conic[1], 0.5 * t.conic[1], t.conic[2];
        const Mat2 g_cov2d = -q * gq * q;

        const Mat3 rot = quat_to_rotation(g.quat);
        const Mat3 cov3d = build_covariance(rot, g.log_scale);
        const ProjectionGrad pg = project_vjp(g.mean, cov3d, ctx.camera, t.mean2d, g_cov2d);
        const CovarianceGrad cg = build_covariance_vjp(rot, g.log_scale, pg.cov3d);
        out_g.mean = pg.mean;
        out_g.log_scale = cg.log_scale;
        out_g.quat = quat_to_rotation_vjp(g.quat, cg.rot);
        out_g.opacity_logit = t.opacity * s.opacity * (1.0 - s.opacity);

        const Vec3 dir = s.view_offset.normalized();
        const ShGrad sg = sh_color_vjp(g.sh, dir, t.color);
        out_g.sh = sg.sh;
        out_g.mean += normalize_vjp(s.view_offset, sg.view_dir);
    });
    return grads;
}

}  // namespace glowgs
