#include "glowgs/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "glowgs/error.hpp"
#include "glowgs/glowsim.hpp"
#include "glowgs/losses.hpp"

namespace glowgs {

namespace {

constexpr std::size_t kFixedParams = 11;  // mean 3, quat 4, log_scale 3, opacity 1

std::size_t params_per_gaussian(const Gaussian3D& g) { return kFixedParams + g.sh.size(); }

void pack_grad(const GaussianGrad& g, double scale, double* out) {
    for (int i = 0; i < 3; ++i) out[i] += scale * g.mean[i];
    for (int i = 0; i < 4; ++i) out[3 + i] += scale * g.quat[i];
    for (int i = 0; i < 3; ++i) out[7 + i] += scale * g.log_scale[i];
    out[10] += scale * g.opacity_logit;
    for (std::size_t i = 0; i < g.sh.size(); ++i) out[kFixedParams + i] += scale * g.sh[i];
}

double* param_ptr(Gaussian3D& g, std::size_t k) {
    if (k < 3) return &g.mean[static_cast<Eigen::Index>(k)];
    if (k < 7) return &g.quat[static_cast<Eigen::Index>(k - 3)];
    if (k < 10) return &g.log_scale[static_cast<Eigen::Index>(k - 7)];
    if (k == 10) return &g.opacity_logit;
    return &g.sh[k - kFixedParams];
}

struct Adam {
    std::vector<double> m, v;
    int step = 0;

    void resize(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    }

    // Keeps moments of surviving Gaussians and zeroes those of new ones.
    void remap(const std::vector<std::int64_t>& origin, std::size_t stride) {
        std::vector<double> nm(origin.size() * stride, 0.0), nv(origin.size() * stride, 0.0);
        for (std::size_t i = 0; i < origin.size(); ++i) {
            if (origin[i] < 0) continue;
            const std::size_t src = static_cast<std::size_t>(origin[i]) * stride;
            std::copy_n(m.begin() + static_cast<std::ptrdiff_t>(src), stride, nm.begin() + static_cast<std::ptrdiff_t>(i * stride));
            std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(src), stride, nv.begin() + static_cast<std::ptrdiff_t>(i * stride));
        }
        m = std::move(nm);
        v = std::move(nv);
    }
};

double mean_lr(const LearningRates& lr, int iter, int iters) {
    if (iters <= 1) return lr.mean;
    const double s = std::clamp(static_cast<double>(iter - 1) / (iters - 1), 0.0, 1.0);
    return std::exp(std::log(lr.mean) * (1.0 - s) + std::log(lr.mean_final) * s);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

void TrainConfig::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("lambda must lie in [0, 1]");
    if (semantic_every < 1) throw InvalidInput("semantic_every must be at least 1");
    if (iters < 0) throw InvalidInput("iteration count must be non-negative");
    if (perturb_rot_deg < 0.0 || perturb_trans_frac < 0.0) throw InvalidInput("perturbation magnitudes must be non-negative");
    if (crop < 1) throw InvalidInput("crop size must be positive");
    if (!(lr.mean > 0.0 && lr.mean_final > 0.0)) throw InvalidInput("mean learning rates must be positive");
    if (densify.every < 1) throw InvalidInput("densify interval must be at least 1");
    if (!(densify.split_factor > 1.0)) throw InvalidInput("split factor must exceed 1");
}

std::string TrainLog::to_jsonl() const {
    std::string out;
    for (const TrainRecord& r : records) {
        nlohmann::json j;
        j["iter"] = r.iter;
        j["l_ori"] = r.l_ori;
        j["semantic"] = r.semantic ? nlohmann::json(*r.semantic) : nlohmann::json(nullptr);
        j["total"] = r.total;
        j["gaussians"] = r.gaussians;
        j["cloned"] = r.cloned;
        j["split"] = r.split;
        j["pruned"] = r.pruned;
        j["elapsed_ms"] = r.elapsed_ms;
        out += j.dump();
        out += '\n';
    }
    return out;
}

Camera perturb_pose(const Camera& cam, double rot_deg, double trans_frac, double extent, Rng& rng) {
    if (rot_deg < 0.0 || trans_frac < 0.0) throw InvalidInput("perturbation magnitudes must be non-negative");
    if (rot_deg == 0.0 && trans_frac == 0.0) return cam;

    Vec3 axis;
    do {
        axis = Vec3(rng.normal(), rng.normal(), rng.normal());
    } while (axis.norm() < 1e-12);
    axis.normalize();
    const double angle = rng.uniform(0.0, rot_deg) * std::numbers::pi / 180.0;

    Vec3 offset;
    do {
        offset = Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    } while (offset.squaredNorm() > 1.0);
    offset *= trans_frac * extent;

    Camera out = cam;
    const Vec3 center = cam.center() + offset;
    out.rot = Eigen::AngleAxisd(angle, axis).toRotationMatrix() * cam.rot;
    out.trans = -out.rot * center;
    return out;
}

void DensifyStats::reset(std::size_t n) {
    grad_sum.assign(n, 0.0);
    visible_count.assign(n, 0);
}

DensifyOutcome densify_and_prune(const std::vector<Gaussian3D>& scene, const DensifyStats& stats,
                                 const DensifyConfig& cfg, double extent, Rng& rng) {
    if (stats.grad_sum.size() != scene.size() || stats.visible_count.size() != scene.size()) {
        throw InvalidInput("densify statistics do not match the scene size");
    }
    DensifyOutcome out;
    std::vector<Gaussian3D> grown;
    std::vector<std::int64_t> origin;
    grown.reserve(scene.size());
    std::vector<Gaussian3D> extra;
    const double dense_limit = cfg.dense_frac * extent;
    const double shrink = std::log(cfg.split_factor);
    std::size_t budget = cfg.max_gaussians > scene.size() ? cfg.max_gaussians - scene.size() : 0;

    for (std::size_t i = 0; i < scene.size(); ++i) {
        const Gaussian3D& g = scene[i];
        const double avg = stats.visible_count[i] ? stats.grad_sum[i] / stats.visible_count[i] : 0.0;
        if (avg < cfg.grad_threshold || budget == 0) {
            grown.push_back(g);
            origin.push_back(static_cast<std::int64_t>(i));
            continue;
        }
        if (g.scale().maxCoeff() <= dense_limit) {
            grown.push_back(g);
            origin.push_back(static_cast<std::int64_t>(i));
            extra.push_back(g);
            ++out.cloned;
            --budget;
        } else {
            const Mat3 rot = quat_to_rotation(g.quat);
            const Vec3 s = g.scale();
            for (int c = 0; c < 2; ++c) {
                Gaussian3D child = g;
                child.mean = g.mean + rot * Vec3(rng.normal() * s.x(), rng.normal() * s.y(), rng.normal() * s.z());
                child.log_scale = g.log_scale.array() - shrink;
                extra.push_back(child);
            }
            ++out.split;
            --budget;
        }
    }
    for (Gaussian3D& g : extra) {
        grown.push_back(std::move(g));
        origin.push_back(-1);
    }
    for (std::size_t i = 0; i < grown.size(); ++i) {
        if (grown[i].opacity() < cfg.prune_opacity) {
            ++out.pruned;
            continue;
        }
        out.scene.push_back(std::move(grown[i]));
        out.origin.push_back(origin[i]);
    }
    return out;
}

std::vector<Gaussian3D> init_scene(const std::vector<PosedImage>& views, const InitConfig& cfg, Rng& rng) {
    if (views.empty()) throw InvalidInput("scene initialization needs at least one view");
    if (!(cfg.depth_min > 0.0 && cfg.depth_max >= cfg.depth_min)) throw InvalidInput("invalid init depth range");
    if (!(cfg.opacity > 0.0 && cfg.opacity < 1.0)) throw InvalidInput("init opacity must lie in (0, 1)");
    if (cfg.sh_degree < 0 || cfg.sh_degree > 2) throw InvalidInput("init SH degree must lie in [0, 2]");
    std::vector<Gaussian3D> scene;
    scene.reserve(cfg.count);
    const std::size_t n_sh = 3 * static_cast<std::size_t>((cfg.sh_degree + 1) * (cfg.sh_degree + 1));
    for (std::size_t i = 0; i < cfg.count; ++i) {
        const PosedImage& v = views[rng.below(views.size())];
        const Camera& cam = v.camera;
        const double px = rng.uniform(0.0, cam.width), py = rng.uniform(0.0, cam.height);
        const double depth = rng.uniform(cfg.depth_min, cfg.depth_max);
        const Vec3 pc((px - cam.cx) / cam.fx * depth, (py - cam.cy) / cam.fy * depth, depth);
        Gaussian3D g;
        g.mean = cam.rot.transpose() * (pc - cam.trans);
        g.log_scale = Vec3::Constant(std::log(1.5 * depth / cam.fx));
        g.opacity_logit = logit(cfg.opacity);
        g.sh.assign(n_sh, 0.0);
        const int ix = std::min(static_cast<int>(px), cam.width - 1), iy = std::min(static_cast<int>(py), cam.height - 1);
        const Vec3 rgb(v.image.at(ix, iy, 0), v.image.at(ix, iy, 1), v.image.at(ix, iy, 2));
        const Vec3 dc = rgb_to_sh_dc(rgb);
        for (int c = 0; c < 3; ++c) g.sh[static_cast<std::size_t>(c)] = dc[c];
        scene.push_back(std::move(g));
    }
    return scene;
}

Image render_for_extractor(std::span<const Gaussian3D> scene, const Camera& cam, int min_side, const Vec3& background) {
    const RenderOutput out = rasterize(scene, cam, background);
    const auto [w, h] = upscaled_size(cam.width, cam.height, min_side);
    if (w == cam.width && h == cam.height) return out.image;
    return resize_bilinear(out.image, w, h);
}

SemanticStep semantic_step(std::span<const Gaussian3D> scene, const Camera& cam, const PixelRect& crop,
                           const FeatureBank& bank, const BuiltinDescriptor& extractor, const Vec3& background) {
    const RenderOutput out = rasterize(scene, cam, background);
    const auto [w, h] = upscaled_size(cam.width, cam.height, extractor.crop_size());
    const bool resized = w != cam.width || h != cam.height;
    const Image up = resized ? resize_bilinear(out.image, w, h) : out.image;
    const FeatureSet fs = extractor.describe(up, crop);
    const SemanticResult sr = semantic_term(fs, bank);
    const Image g_up = extractor.describe_backward(up, crop, sr.grad_patches, {});
    const Image g = resized ? resize_bilinear_backward(g_up, cam.width, cam.height) : g_up;
    SemanticStep step;
    step.value = sr.value;
    step.grads = rasterize_backward(out, scene, g);
    return step;
}

TrainResult train(std::vector<Gaussian3D> scene0, const std::vector<PosedImage>& views, const FeatureBank* bank,
                  const TrainConfig& cfg, const BuiltinDescriptor& extractor, const ProgressFn& progress) {
    cfg.validate();
    if (views.empty()) throw InvalidInput("training needs at least one posed view");
    for (const PosedImage& v : views) {
        if (v.image.width != v.camera.width || v.image.height != v.camera.height || v.image.channels != 3) {
            throw InvalidInput("training image does not match its camera");
        }
    }
    if (scene0.empty()) throw InvalidInput("initial scene is empty");
    const bool semantic_on = cfg.semantic_enabled && cfg.iters > 0;
    if (semantic_on && cfg.lambda < 1.0) {
        if (!bank || bank->empty()) throw InvalidInput("a non-empty feature bank is required when lambda < 1");
    }
    if (semantic_on && bank && !bank->empty()) {
        if (bank->dim != extractor.dim()) throw InvalidInput("bank dimension does not match the extractor");
        if (cfg.crop != extractor.crop_size()) throw InvalidInput("crop size does not match the extractor");
    }
    const bool semantic_available = semantic_on && bank && !bank->empty();

    TrainResult result;
    std::vector<Gaussian3D>& scene = result.scene;
    scene = std::move(scene0);
    const std::size_t stride = params_per_gaussian(scene.front());
    for (const Gaussian3D& g : scene) {
        if (params_per_gaussian(g) != stride) throw InvalidInput("all Gaussians must share one SH degree");
    }
    if (cfg.iters == 0) return result;

    std::vector<Camera> cams;
    for (const PosedImage& v : views) cams.push_back(v.camera);
    double extent = scene_extent(cams);
    if (!(extent > 1e-9)) extent = 1.0;

    Rng rng(cfg.seed);
    Rng sem_rng = rng.fork(1);
    Rng densify_rng = rng.fork(2);

    Adam adam;
    adam.resize(scene.size() * stride);
    DensifyStats stats;
    stats.reset(scene.size());
    std::vector<double> grad;

    for (int it = 1; it <= cfg.iters; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        TrainRecord rec;
        rec.iter = it;

        const PosedImage& view = views[rng.below(views.size())];
        const RenderOutput out = rasterize(scene, view.camera, cfg.background);
        const LossWithGrad lo = original_loss(out.image, view.image);
        const SceneGrads go = rasterize_backward(out, scene, lo.grad);
        if (!std::isfinite(lo.value)) throw NumericalError("original loss is not finite at iteration " + std::to_string(it));
        rec.l_ori = lo.value;
        rec.total = lo.value;

        const bool semantic_iter = semantic_available && it % cfg.semantic_every == 0;
        const double ori_weight = semantic_iter ? cfg.lambda : 1.0;
        grad.assign(scene.size() * stride, 0.0);
        for (std::size_t i = 0; i < scene.size(); ++i) {
            pack_grad(go.gaussians[i], ori_weight, grad.data() + i * stride);
            if (out.ctx.splats[i].visible) {
                stats.grad_sum[i] += go.screen_grad_norm[i];
                ++stats.visible_count[i];
            }
        }

        if (semantic_iter) {
            const Camera& base = views[sem_rng.below(views.size())].camera;
            const Camera cam = perturb_pose(base, cfg.perturb_rot_deg, cfg.perturb_trans_frac, extent, sem_rng);
            const auto [w, h] = upscaled_size(cam.width, cam.height, cfg.crop);
            const PixelRect rect{static_cast<int>(sem_rng.below(static_cast<std::uint64_t>(w - cfg.crop + 1))),
                                 static_cast<int>(sem_rng.below(static_cast<std::uint64_t>(h - cfg.crop + 1))), cfg.crop,
                                 cfg.crop};
            double value = 0.0;
            if (cfg.lambda < 1.0) {
                const SemanticStep s = semantic_step(scene, cam, rect, *bank, extractor, cfg.background);
                value = s.value;
                for (std::size_t i = 0; i < scene.size(); ++i) {
                    pack_grad(s.grads.gaussians[i], 1.0 - cfg.lambda, grad.data() + i * stride);
                }
            } else {
                const Image up = render_for_extractor(scene, cam, cfg.crop, cfg.background);
                value = semantic_term(extractor.describe(up, rect), *bank).value;
            }
            if (!std::isfinite(value)) throw NumericalError("semantic term is not finite at iteration " + std::to_string(it));
            rec.semantic = value;
            rec.total = cfg.lambda * lo.value + (1.0 - cfg.lambda) * value;
        }

        ++adam.step;
        const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
        const double bc1 = 1.0 - std::pow(b1, adam.step), bc2 = 1.0 - std::pow(b2, adam.step);
        const double lr_mean = mean_lr(cfg.lr, it, cfg.iters);
        for (std::size_t i = 0; i < scene.size(); ++i) {
            for (std::size_t k = 0; k < stride; ++k) {
                const std::size_t p = i * stride + k;
                const double g = grad[p];
                if (!std::isfinite(g)) throw NumericalError("non-finite gradient at iteration " + std::to_string(it));
                adam.m[p] = b1 * adam.m[p] + (1.0 - b1) * g;
                adam.v[p] = b2 * adam.v[p] + (1.0 - b2) * g * g;
                const double lr = k < 3 ? lr_mean
                                : k < 7 ? cfg.lr.quat
                                : k < 10 ? cfg.lr.log_scale
                                : k == 10 ? cfg.lr.opacity
                                : k < kFixedParams + 3 ? cfg.lr.sh_dc
                                                       : cfg.lr.sh_rest;
                *param_ptr(scene[i], k) -= lr * (adam.m[p] / bc1) / (std::sqrt(adam.v[p] / bc2) + cfg.adam_eps);
            }
        }

        const DensifyConfig& dc = cfg.densify;
        if (it >= dc.start_iter && it <= dc.stop_iter && it % dc.every == 0) {
            DensifyOutcome d = densify_and_prune(scene, stats, dc, extent, densify_rng);
            if (d.scene.empty()) throw NumericalError("all Gaussians were pruned at iteration " + std::to_string(it));
            rec.cloned = d.cloned;
            rec.split = d.split;
            rec.pruned = d.pruned;
            scene = std::move(d.scene);
            adam.remap(d.origin, stride);
            stats.reset(scene.size());
        }

        rec.gaussians = scene.size();
        rec.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        result.log.records.push_back(rec);
        if (progress) progress(rec);
    }
    return result;
}

}  // namespace glowgs
