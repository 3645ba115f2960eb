#include <gtest/gtest.h>

#include <cmath>

#include "glowgs/error.hpp"
#include "glowgs/glowsim.hpp"

using namespace glowgs;

namespace {

GlowSceneSpec single_emitter(double q) {
    GlowSceneSpec s;
    s.emitters.push_back({Vec3::Zero(), 1.0, Vec3::Ones()});
    s.apsf = {12, q};
    return s;
}

// Odd image size puts the principal point on a pixel center, so the emitter splats onto one pixel.
Camera centered_camera() { return Camera::look_at(Vec3(0, 0, -5), Vec3::Zero(), Vec3::UnitY(), 41, 41, 60.0); }

std::size_t disc_count(double radius, int kernel_radius) {
    std::size_t n = 0;
    for (int dy = -kernel_radius; dy <= kernel_radius; ++dy)
        for (int dx = -kernel_radius; dx <= kernel_radius; ++dx)
            if (dx * dx + dy * dy <= radius * radius) ++n;
    return n;
}

}  // namespace

TEST(Apsf, KernelProfile) {
    const ApsfKernel k = apsf_kernel(12, 1.5);
    EXPECT_DOUBLE_EQ(k.sigma, 4.0);
    EXPECT_EQ(k.at(0, 0), 1.0);
    EXPECT_NEAR(k.at(3, 4), std::exp(-std::pow(5.0 / 4.0, 1.5)), 1e-15);
    EXPECT_EQ(k.at(-3, 4), k.at(4, 3));
}

TEST(Apsf, LevelRadiiForGaussianShape) {
    const ApsfKernel k = apsf_kernel(12, 2.0);
    EXPECT_NEAR(k.radius_at_level(0.10), 4.0 * std::sqrt(std::log(10.0)), 1e-12);
    EXPECT_NEAR(k.radius_at_level(0.01), 4.0 * std::sqrt(std::log(100.0)), 1e-12);
}

TEST(GlowMask, TenPercentMaskIsDiscOfLevelRadius) {
    const GlowSceneSpec s = single_emitter(2.0);
    const Camera cam = centered_camera();
    const double sigma = 4.0;
    const GlowMask m10 = glow_mask(s, cam, 0.10);
    EXPECT_EQ(m10.mask.count(), disc_count(sigma * std::sqrt(std::log(10.0)), 12));
    const GlowMask m1 = glow_mask(s, cam, 0.01);
    EXPECT_EQ(m1.mask.count(), disc_count(sigma * std::sqrt(std::log(100.0)), 12));
    EXPECT_TRUE(m10.mask.at(20, 20));
    EXPECT_THROW(glow_mask(s, cam, 0.0), InvalidInput);
}

TEST(GlowSim, OccludedEmitterHasNoGlow) {
    GlowSceneSpec s = single_emitter(1.2);
    const Camera cam = centered_camera();
    EXPECT_GT(render_emitter_layer(s, 0, cam).at(20, 20), 0.99);
    Surface wall;
    wall.origin = Vec3(-2, -2, -1);
    wall.edge_u = Vec3(4, 0, 0);
    wall.edge_v = Vec3(0, 4, 0);
    s.surfaces.push_back(wall);
    const Image layer = render_emitter_layer(s, 0, cam);
    for (double v : layer.data) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(glow_mask(s, cam).mask.count(), 0u);
}

TEST(GlowSim, ValidationRejectsBadSpecs) {
    GlowSceneSpec s = single_emitter(1.2);
    EXPECT_NO_THROW(s.validate());
    s.emitters[0].intensity = 0.0;
    EXPECT_THROW(s.validate(), InvalidInput);
    s = single_emitter(1.2);
    s.apsf.radius_px = 0;
    EXPECT_THROW(s.validate(), InvalidInput);
    s = single_emitter(0.5);
    EXPECT_THROW(s.validate(), InvalidInput);
    s = single_emitter(4.5);
    EXPECT_THROW(s.validate(), InvalidInput);
    s = single_emitter(1.2);
    Surface bad;
    bad.texture = "marble";
    s.surfaces.push_back(bad);
    EXPECT_THROW(s.validate(), InvalidInput);
    EXPECT_THROW(apsf_kernel(0, 1.0), InvalidInput);
}

TEST(GlowSim, PresetsRenderDeterministicallyInRange) {
    for (int id = 0; id < preset_scene_count(); ++id) {
        const GlowSceneSpec s = preset_scene(id);
        EXPECT_NO_THROW(s.validate());
        const Camera cam = orbit_cameras(s.rig, {0.5}).front();
        const Image a = render_reference(s, cam);
        const Image b = render_reference(s, cam);
        EXPECT_EQ(a.data, b.data);
        for (double v : a.data) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        EXPECT_GT(glow_mask(s, cam).mask.count(), 0u) << s.name;
    }
}

TEST(PoseSplit, DisjointAndEvenlySpaced) {
    const GlowSceneSpec s = preset_scene(0);
    Rng rng(5);
    PoseSplitConfig cfg;
    cfg.train = 6;
    cfg.test = 5;
    cfg.candidates = 24;
    const PoseSplit split = make_pose_split(s.rig, cfg, rng);
    ASSERT_EQ(split.train.size(), 6u);
    ASSERT_EQ(split.test.size(), 5u);
    ASSERT_EQ(split.candidates.size(), 24u);
    const double spacing = (split.train[1].center() - split.train[0].center()).norm();
    for (std::size_t i = 1; i + 1 < split.train.size(); ++i) {
        EXPECT_NEAR((split.train[i + 1].center() - split.train[i].center()).norm(), spacing, 1e-9);
    }
    std::vector<Camera> seen = split.train;
    for (const auto* set : {&split.test, &split.candidates}) {
        for (const Camera& c : *set) {
            for (const Camera& o : seen) EXPECT_GT((c.center() - o.center()).norm(), 1e-6);
        }
        seen.insert(seen.end(), set->begin(), set->end());
    }
    for (const Camera& c : split.candidates) EXPECT_NO_THROW(c.validate(1e-12));
}

TEST(PoseSplit, SceneExtent) {
    std::vector<Camera> cams{Camera::look_at(Vec3(0, 0, -3), Vec3::Zero(), Vec3::UnitY(), 8, 8, 60),
                             Camera::look_at(Vec3(4, 0, -3), Vec3::Zero(), Vec3::UnitY(), 8, 8, 60)};
    EXPECT_NEAR(scene_extent(cams), 4.0, 1e-12);
}
