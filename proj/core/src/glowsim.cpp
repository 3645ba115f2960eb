#include "glowgs/glowsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "glowgs/error.hpp"

namespace glowgs {

namespace {

constexpr int kSupersample = 2;

std::uint64_t hash3(std::int64_t x, std::int64_t y, std::uint64_t seed) {
    std::uint64_t h = seed * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(x) * 0xC2B2AE3D27D4EB4Full;
    h = (h ^ (h >> 31)) * 0xBF58476D1CE4E5B9ull;
    h ^= static_cast<std::uint64_t>(y) * 0x165667B19E3779F9ull;
    h = (h ^ (h >> 27)) * 0x94D049BB133111EBull;
    return h ^ (h >> 31);
}

double lattice(std::int64_t x, std::int64_t y, std::uint64_t seed) {
    return static_cast<double>(hash3(x, y, seed) >> 11) * 0x1.0p-53;
}

double value_noise(double x, double y, std::uint64_t seed) {
    const double fx = std::floor(x), fy = std::floor(y);
    const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
    double tx = x - fx, ty = y - fy;
    tx = tx * tx * (3.0 - 2.0 * tx);
    ty = ty * ty * (3.0 - 2.0 * ty);
    const double a = lattice(ix, iy, seed), b = lattice(ix + 1, iy, seed);
    const double c = lattice(ix, iy + 1, seed), d = lattice(ix + 1, iy + 1, seed);
    return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
}

double texture_value(const std::string& tex, double s, double t, double scale, std::uint64_t seed) {
    const double u = s * scale, v = t * scale;
    if (tex == "flat") return 1.0;
    if (tex == "checker") {
        const auto k = static_cast<std::int64_t>(std::floor(u)) + static_cast<std::int64_t>(std::floor(v));
        return (k & 1) ? 1.0 : 0.3;
    }
    if (tex == "stripes") return std::sin(2.0 * std::numbers::pi * u) > 0.0 ? 1.0 : 0.35;
    if (tex == "bricks") {
        const double row = std::floor(v * 2.0);
        const double uu = u + (static_cast<std::int64_t>(row) & 1 ? 0.5 : 0.0);
        const double fu = uu - std::floor(uu), fv = v * 2.0 - row;
        if (fu < 0.06 || fv < 0.1) return 0.25;
        const double shade = lattice(static_cast<std::int64_t>(std::floor(uu)), static_cast<std::int64_t>(row), seed);
        return 0.65 + 0.35 * shade;
    }
    if (tex == "noise") {
        const double n = 0.65 * value_noise(u, v, seed) + 0.35 * value_noise(2.0 * u + 17.0, 2.0 * v, seed + 1);
        return 0.25 + 0.75 * n;
    }
    if (tex == "tiles") {
        const double fu = u - std::floor(u), fv = v - std::floor(v);
        if (fu < 0.08 || fv < 0.08) return 0.2;
        return 0.6 + 0.4 * lattice(static_cast<std::int64_t>(std::floor(u)), static_cast<std::int64_t>(std::floor(v)), seed + 7);
    }
    throw InvalidInput("unknown texture '" + tex + "'");
}

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    std::size_t surface = 0;
    double s = 0.0, v = 0.0;
};

std::optional<Hit> intersect(const Surface& surf, const Vec3& origin, const Vec3& dir) {
    const Vec3 n = surf.edge_u.cross(surf.edge_v);
    const double denom = dir.dot(n);
    if (std::abs(denom) < 1e-12) return std::nullopt;
    const double t = (surf.origin - origin).dot(n) / denom;
    if (!(t > 1e-9)) return std::nullopt;
    const Vec3 rel = origin + t * dir - surf.origin;
    const double uu = surf.edge_u.dot(surf.edge_u), uv = surf.edge_u.dot(surf.edge_v), vv = surf.edge_v.dot(surf.edge_v);
    const double ru = rel.dot(surf.edge_u), rv = rel.dot(surf.edge_v);
    const double det = uu * vv - uv * uv;
    const double s = (ru * vv - rv * uv) / det;
    const double v = (rv * uu - ru * uv) / det;
    if (s < 0.0 || s > 1.0 || v < 0.0 || v > 1.0) return std::nullopt;
    Hit h;
    h.t = t;
    h.s = s;
    h.v = v;
    return h;
}

std::optional<Hit> trace(const GlowSceneSpec& spec, const Vec3& origin, const Vec3& dir) {
    std::optional<Hit> best;
    for (std::size_t i = 0; i < spec.surfaces.size(); ++i) {
        auto h = intersect(spec.surfaces[i], origin, dir);
        if (h && (!best || h->t < best->t)) {
            h->surface = i;
            best = h;
        }
    }
    return best;
}

Vec3 pixel_ray(const Camera& cam, double u, double v) {
    const Vec3 d_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
    return (cam.rot.transpose() * d_cam).normalized();
}

// Continuous pixel coordinates of a visible emitter, or nullopt when behind the camera or occluded.
std::optional<Vec2> emitter_pixel(const GlowSceneSpec& spec, const Emitter& e, const Camera& cam) {
    const Vec3 pc = cam.rot * e.position + cam.trans;
    if (!(pc.z() > 0.01)) return std::nullopt;
    const Vec3 origin = cam.center();
    const Vec3 to = e.position - origin;
    const double dist = to.norm();
    if (const auto h = trace(spec, origin, to / dist); h && h->t < dist * (1.0 - 1e-6)) return std::nullopt;
    return Vec2(cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy);
}

}  // namespace

void GlowSceneSpec::validate() const {
    for (const Emitter& e : emitters) {
        if (!(e.intensity > 0.0)) throw InvalidInput("emitter intensity must be positive");
    }
    if (apsf.radius_px < 1) throw InvalidInput("APSF kernel radius must be at least 1");
    if (!(apsf.q > 0.5 && apsf.q <= 4.0)) throw InvalidInput("APSF shape q must lie in (0.5, 4]");
    if (ambient < 0.0) throw InvalidInput("ambient level must be non-negative");
    for (const Surface& s : surfaces) {
        if (s.edge_u.cross(s.edge_v).norm() < 1e-12) throw InvalidInput("degenerate surface");
        (void)texture_value(s.texture, 0.5, 0.5, s.texture_scale, seed);
    }
    if (rig.width <= 0 || rig.height_px <= 0) throw InvalidInput("rig image size must be positive");
}

double ApsfKernel::radius_at_level(double level) const { return sigma * std::pow(std::log(1.0 / level), 1.0 / q); }

ApsfKernel apsf_kernel(int radius, double q) {
    if (radius < 1) throw InvalidInput("APSF kernel radius must be at least 1");
    if (!(q > 0.5 && q <= 4.0)) throw InvalidInput("APSF shape q must lie in (0.5, 4]");
    ApsfKernel k;
    k.radius = radius;
    k.sigma = radius / 3.0;
    k.q = q;
    const int side = 2 * radius + 1;
    k.values.resize(static_cast<std::size_t>(side) * side);
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            const double r = std::sqrt(static_cast<double>(dx * dx + dy * dy));
            k.values[static_cast<std::size_t>(dy + radius) * side + static_cast<std::size_t>(dx + radius)] =
                std::exp(-std::pow(r / k.sigma, q));
        }
    }
    return k;
}

Image render_surfaces(const GlowSceneSpec& spec, const Camera& cam) {
    Image img(cam.width, cam.height, 3);
    const Vec3 origin = cam.center();
    const double inv_ss = 1.0 / (kSupersample * kSupersample);
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            Vec3 acc = Vec3::Zero();
            for (int sy = 0; sy < kSupersample; ++sy) {
                for (int sx = 0; sx < kSupersample; ++sx) {
                    const double u = x + (sx + 0.5) / kSupersample;
                    const double v = y + (sy + 0.5) / kSupersample;
                    const Vec3 dir = pixel_ray(cam, u, v);
                    const auto hit = trace(spec, origin, dir);
                    if (!hit) continue;
                    const Surface& s = spec.surfaces[hit->surface];
                    const Vec3 p = origin + hit->t * dir;
                    Vec3 light = Vec3::Constant(spec.ambient);
                    for (const Emitter& e : spec.emitters) {
                        const double d2 = std::max((e.position - p).squaredNorm(), 0.04);
                        light += spec.irradiance_gain * e.intensity / d2 * e.color;
                    }
                    const std::uint64_t tex_seed = spec.seed * 131 + hit->surface;
                    const double tex = texture_value(s.texture, hit->s, hit->v, s.texture_scale, tex_seed);
                    acc += tex * s.albedo.cwiseProduct(light);
                }
            }
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = acc[c] * inv_ss;
        }
    }
    return img;
}

Image render_emitter_layer(const GlowSceneSpec& spec, std::size_t emitter, const Camera& cam) {
    Image layer(cam.width, cam.height, 1);
    const Emitter& e = spec.emitters.at(emitter);
    const auto px = emitter_pixel(spec, e, cam);
    if (!px) return layer;
    const ApsfKernel k = apsf_kernel(spec.apsf.radius_px, spec.apsf.q);
    // Bilinear point splat, then stamp the kernel at each splat tap.
    const double sx = px->x() - 0.5, sy = px->y() - 0.5;
    const int ix = static_cast<int>(std::floor(sx)), iy = static_cast<int>(std::floor(sy));
    const double fx = sx - ix, fy = sy - iy;
    const double w[2][2] = {{(1 - fx) * (1 - fy), fx * (1 - fy)}, {(1 - fx) * fy, fx * fy}};
    for (int j = 0; j < 2; ++j) {
        for (int i = 0; i < 2; ++i) {
            const double weight = w[j][i] * e.intensity;
            if (weight == 0.0) continue;
            const int cx = ix + i, cy = iy + j;
            for (int dy = -k.radius; dy <= k.radius; ++dy) {
                const int y = cy + dy;
                if (y < 0 || y >= cam.height) continue;
                for (int dx = -k.radius; dx <= k.radius; ++dx) {
                    const int x = cx + dx;
                    if (x < 0 || x >= cam.width) continue;
                    layer.at(x, y) += weight * k.at(dx, dy);
                }
            }
        }
    }
    return layer;
}

Image render_reference(const GlowSceneSpec& spec, const Camera& cam) {
    spec.validate();
    Image img = render_surfaces(spec, cam);
    for (std::size_t e = 0; e < spec.emitters.size(); ++e) {
        const Image layer = render_emitter_layer(spec, e, cam);
        const Vec3& color = spec.emitters[e].color;
        for (int y = 0; y < cam.height; ++y) {
            for (int x = 0; x < cam.width; ++x) {
                const double v = layer.at(x, y);
                for (int c = 0; c < 3; ++c) img.at(x, y, c) += v * color[c];
            }
        }
    }
    clamp01(img);
    return img;
}

GlowMask glow_mask(const GlowSceneSpec& spec, const Camera& cam, double threshold_frac) {
    if (!(threshold_frac > 0.0 && threshold_frac <= 1.0)) throw InvalidInput("threshold_frac must lie in (0, 1]");
    GlowMask gm;
    gm.threshold_frac = threshold_frac;
    gm.mask = Mask(cam.width, cam.height);
    for (std::size_t e = 0; e < spec.emitters.size(); ++e) {
        const Image layer = render_emitter_layer(spec, e, cam);
        const double peak = *std::max_element(layer.data.begin(), layer.data.end());
        if (!(peak > 0.0)) continue;
        const double level = threshold_frac * peak;
        for (int y = 0; y < cam.height; ++y) {
            for (int x = 0; x < cam.width; ++x) {
                if (layer.at(x, y) >= level) gm.mask.set(x, y, true);
            }
        }
    }
    return gm;
}

std::vector<Camera> orbit_cameras(const CameraRig& rig, const std::vector<double>& fractions, double height_offset) {
    const Vec3 up = rig.up.normalized();
    // Orbit plane basis: `front` is the direction from target to the arc midpoint.
    Vec3 front = Vec3::UnitZ() - up * up.z();
    if (front.norm() < 1e-9) front = Vec3::UnitX() - up * up.x();
    front.normalize();
    const Vec3 side = up.cross(front);
    std::vector<Camera> cams;
    for (double f : fractions) {
        const double ang = (f - 0.5) * rig.arc_deg * std::numbers::pi / 180.0;
        const Vec3 eye = rig.target + rig.radius * (std::cos(ang) * front + std::sin(ang) * side) +
                         (rig.height + height_offset) * up;
        cams.push_back(Camera::look_at(eye, rig.target, up, rig.width, rig.height_px, rig.fov_deg));
    }
    return cams;
}

PoseSplit make_pose_split(const CameraRig& rig, const PoseSplitConfig& cfg, Rng& rng) {
    if (cfg.train < 1) throw InvalidInput("pose split needs at least one training view");
    PoseSplit split;
    std::vector<double> f;
    for (int i = 0; i < cfg.train; ++i) f.push_back(cfg.train == 1 ? 0.5 : static_cast<double>(i) / (cfg.train - 1));
    split.train = orbit_cameras(rig, f);
    f.clear();
    for (int j = 0; j < cfg.test; ++j) f.push_back((j + 0.5) / cfg.test);
    split.test = orbit_cameras(rig, f, cfg.test_height_offset);
    for (int k = 0; k < cfg.candidates; ++k) {
        const double frac = rng.uniform();
        const double dh = rng.uniform(-cfg.candidate_height_jitter, cfg.candidate_height_jitter) * rig.radius;
        split.candidates.push_back(orbit_cameras(rig, {frac}, dh).front());
    }
    return split;
}

double scene_extent(const std::vector<Camera>& cams) {
    double best = 0.0;
    for (std::size_t i = 0; i < cams.size(); ++i) {
        for (std::size_t j = i + 1; j < cams.size(); ++j) {
            best = std::max(best, (cams[i].center() - cams[j].center()).norm());
        }
    }
    return best > 0.0 ? best : 1.0;
}

namespace {

Surface quad(const Vec3& origin, const Vec3& eu, const Vec3& ev, const std::string& tex, const Vec3& albedo,
             double scale) {
    Surface s;
    s.origin = origin;
    s.edge_u = eu;
    s.edge_v = ev;
    s.texture = tex;
    s.albedo = albedo;
    s.texture_scale = scale;
    return s;
}

// Axis-aligned box as five visible faces (no bottom).
void add_box(GlowSceneSpec& spec, const Vec3& lo, const Vec3& hi, const std::string& tex, const Vec3& albedo,
             double scale) {
    const Vec3 d = hi - lo;
    spec.surfaces.push_back(quad(Vec3(lo.x(), lo.y(), hi.z()), Vec3(d.x(), 0, 0), Vec3(0, d.y(), 0), tex, albedo, scale));
    spec.surfaces.push_back(quad(lo, Vec3(d.x(), 0, 0), Vec3(0, d.y(), 0), tex, albedo, scale));
    spec.surfaces.push_back(quad(lo, Vec3(0, 0, d.z()), Vec3(0, d.y(), 0), tex, albedo, scale));
    spec.surfaces.push_back(quad(Vec3(hi.x(), lo.y(), lo.z()), Vec3(0, 0, d.z()), Vec3(0, d.y(), 0), tex, albedo, scale));
    spec.surfaces.push_back(quad(Vec3(lo.x(), hi.y(), lo.z()), Vec3(d.x(), 0, 0), Vec3(0, 0, d.z()), tex, albedo, scale));
}

}  // namespace

int preset_scene_count() { return 3; }

GlowSceneSpec preset_scene(int id) {
    GlowSceneSpec s;
    s.rig.target = Vec3(0.0, 1.0, 0.0);
    s.rig.up = Vec3::UnitY();
    s.rig.radius = 4.5;
    s.rig.height = 0.4;
    s.rig.arc_deg = 60.0;
    s.rig.fov_deg = 60.0;
    s.apsf = {12, 1.2};
    switch (id) {
        case 0: {
            s.name = "street";
            s.seed = 11;
            s.ambient = 0.10;
            s.surfaces.push_back(quad(Vec3(-5, 0, -3), Vec3(10, 0, 0), Vec3(0, 0, 9), "tiles", Vec3(0.55, 0.5, 0.45), 3.0));
            s.surfaces.push_back(quad(Vec3(-5, 0, -3), Vec3(10, 0, 0), Vec3(0, 6, 0), "bricks", Vec3(0.8, 0.45, 0.3), 3.0));
            s.surfaces.push_back(quad(Vec3(-3.2, 0, -3), Vec3(0, 0, 9), Vec3(0, 6, 0), "stripes", Vec3(0.4, 0.5, 0.7), 4.0));
            s.surfaces.push_back(quad(Vec3(3.2, 0, -3), Vec3(0, 0, 9), Vec3(0, 6, 0), "noise", Vec3(0.6, 0.6, 0.5), 5.0));
            add_box(s, Vec3(-0.9, 0.0, -0.8), Vec3(0.1, 1.1, 0.0), "checker", Vec3(0.7, 0.7, 0.6), 3.0);
            s.emitters.push_back({Vec3(-1.6, 2.3, -2.6), 1.3, Vec3(1.0, 0.75, 0.45)});
            s.emitters.push_back({Vec3(1.7, 2.0, -1.4), 1.1, Vec3(1.0, 0.9, 0.7)});
            s.emitters.push_back({Vec3(0.8, 1.5, 0.8), 0.9, Vec3(0.7, 0.85, 1.0)});
            break;
        }
        case 1: {
            s.name = "plaza";
            s.seed = 23;
            s.ambient = 0.09;
            s.surfaces.push_back(quad(Vec3(-6, 0, -3.5), Vec3(12, 0, 0), Vec3(0, 0, 10), "checker", Vec3(0.5, 0.5, 0.55), 4.0));
            s.surfaces.push_back(quad(Vec3(-6, 0, -3.5), Vec3(12, 0, 0), Vec3(0, 7, 0), "tiles", Vec3(0.6, 0.55, 0.7), 5.0));
            add_box(s, Vec3(-0.6, 0.0, -1.2), Vec3(0.8, 1.6, 0.2), "bricks", Vec3(0.75, 0.5, 0.35), 2.0);
            add_box(s, Vec3(1.4, 0.0, -2.6), Vec3(2.4, 2.4, -1.6), "stripes", Vec3(0.5, 0.6, 0.5), 3.0);
            s.surfaces.push_back(quad(Vec3(-3.8, 0, -3.4), Vec3(0, 0, 8), Vec3(0, 7, 0), "noise", Vec3(0.55, 0.5, 0.6), 4.0));
            s.emitters.push_back({Vec3(-2.0, 2.6, -2.8), 1.4, Vec3(1.0, 0.65, 0.35)});
            s.emitters.push_back({Vec3(0.1, 2.1, -0.5), 1.0, Vec3(1.0, 0.9, 0.8)});
            s.emitters.push_back({Vec3(2.2, 3.0, -1.0), 1.2, Vec3(0.8, 0.9, 1.0)});
            break;
        }
        default: {
            s.name = "alley";
            s.seed = 37;
            s.ambient = 0.11;
            s.apsf = {14, 1.0};
            s.surfaces.push_back(quad(Vec3(-3, 0, -4), Vec3(6, 0, 0), Vec3(0, 0, 10), "noise", Vec3(0.5, 0.48, 0.45), 6.0));
            s.surfaces.push_back(quad(Vec3(-2.4, 0, -4), Vec3(0, 0, 10), Vec3(0, 6, 0), "bricks", Vec3(0.7, 0.4, 0.3), 3.0));
            s.surfaces.push_back(quad(Vec3(2.4, 0, -4), Vec3(0, 0, 10), Vec3(0, 6, 0), "tiles", Vec3(0.45, 0.55, 0.6), 4.0));
            s.surfaces.push_back(quad(Vec3(-3, 0, -3.2), Vec3(6, 0, 0), Vec3(0, 6, 0), "checker", Vec3(0.6, 0.6, 0.6), 4.0));
            add_box(s, Vec3(0.4, 0.0, -1.5), Vec3(1.3, 0.9, -0.6), "stripes", Vec3(0.6, 0.5, 0.4), 4.0);
            s.emitters.push_back({Vec3(-1.2, 2.4, -2.9), 1.5, Vec3(1.0, 0.7, 0.4)});
            s.emitters.push_back({Vec3(1.1, 1.9, -0.4), 1.0, Vec3(0.9, 0.95, 1.0)});
            break;
        }
    }
    return s;
}

}  // namespace glowgs
