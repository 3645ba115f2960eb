#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fd.hpp"
#include "glowgs/descriptor.hpp"
#include "glowgs/error.hpp"

using namespace glowgs;
using glowgs::testing::rel_error;

namespace {

Image smooth_random_image(Rng& rng, int w, int h) {
    Image img(w, h, 3);
    const double fx = rng.uniform(0.2, 0.6), fy = rng.uniform(0.2, 0.6), ph = rng.uniform(0, 6);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                img.at(x, y, c) = 0.5 + 0.3 * std::sin(fx * x + (c + 1) * fy * y + ph) + 0.1 * rng.uniform(-1, 1);
            }
        }
    }
    return img;
}

// Straightforward per-patch evaluation of the descriptor, written independently of the library.
std::vector<double> naive_patch(const Image& img, int x0, int y0, int ps, int crop_x0, int crop_y0, int crop_n) {
    std::vector<double> f(17, 0.0);
    auto lum = [&](int cx, int cy) {
        cx = std::clamp(cx, 0, crop_n - 1);
        cy = std::clamp(cy, 0, crop_n - 1);
        const int ix = crop_x0 + cx, iy = crop_y0 + cy;
        return (img.at(ix, iy, 0) + img.at(ix, iy, 1) + img.at(ix, iy, 2)) / 3.0;
    };
    const double bw = 2.0 * std::numbers::pi / 8.0;
    const std::pair<int, int> zz[6] = {{0, 0}, {0, 1}, {1, 0}, {2, 0}, {1, 1}, {0, 2}};
    for (int y = 0; y < ps; ++y) {
        for (int x = 0; x < ps; ++x) {
            const int cx = x0 + x, cy = y0 + y;
            for (int c = 0; c < 3; ++c) f[static_cast<std::size_t>(c)] += img.at(crop_x0 + cx, crop_y0 + cy, c) / (ps * ps);
            const double gx = 0.5 * (lum(cx + 1, cy) - lum(cx - 1, cy));
            const double gy = 0.5 * (lum(cx, cy + 1) - lum(cx, cy - 1));
            const double m = std::hypot(gx, gy);
            if (m > 0) {
                double theta = std::atan2(gy, gx);
                if (theta < 0) theta += 2 * std::numbers::pi;
                for (int k = 0; k < 8; ++k) {
                    double d = std::abs(theta - k * bw);
                    d = std::min(d, 2 * std::numbers::pi - d);
                    const double w = std::max(0.0, 1.0 - d / bw);
                    f[3 + static_cast<std::size_t>(k)] += BuiltinDescriptor::kHistGain * m * w / (ps * ps);
                }
            }
            for (int k = 0; k < 6; ++k) {
                const auto [u, v] = zz[k];
                const double au = u ? std::sqrt(2.0 / ps) : std::sqrt(1.0 / ps);
                const double av = v ? std::sqrt(2.0 / ps) : std::sqrt(1.0 / ps);
                f[11 + static_cast<std::size_t>(k)] += lum(cx, cy) * au * av *
                                                       std::cos(std::numbers::pi * (2 * y + 1) * u / (2.0 * ps)) *
                                                       std::cos(std::numbers::pi * (2 * x + 1) * v / (2.0 * ps)) / ps;
            }
        }
    }
    double n = 0;
    for (double v : f) n += v * v;
    n = std::sqrt(n);
    for (double& v : f) v /= (n + BuiltinDescriptor::kEps);
    return f;
}

}  // namespace

TEST(Descriptor, ShapeAndBankArithmetic) {
    const BuiltinDescriptor d;
    EXPECT_EQ(d.dim(), 17);
    EXPECT_EQ(d.crop_size(), 256);
    Image img(256, 256, 3, 0.3);
    const FeatureSet fs = d.describe(img, {0, 0, 256, 256});
    EXPECT_EQ(fs.patch_count(), 256u);
    EXPECT_EQ(fs.patches.size(), 256u * 17u);
}

TEST(Descriptor, ConstantGrayHasIdenticalPatchesAndEmptyHistogram) {
    const BuiltinDescriptor d(8, 4);
    const Image img(40, 40, 3, 0.4);
    const FeatureSet fs = d.describe(img, {3, 5, 32, 32});
    for (std::size_t p = 0; p < fs.patch_count(); ++p) {
        for (int k = 0; k < 17; ++k) EXPECT_EQ(fs.patch(p)[static_cast<std::size_t>(k)], fs.patch(0)[static_cast<std::size_t>(k)]);
        for (int k = 3; k < 11; ++k) EXPECT_EQ(fs.patch(p)[static_cast<std::size_t>(k)], 0.0);
    }
    // DC equals mean luminance before normalization, so it sits alongside the three mean-color entries.
    EXPECT_NEAR(fs.patch(0)[11], fs.patch(0)[0], 1e-15);
}

TEST(Descriptor, CopyGivesIdenticalFeatures) {
    Rng rng(1);
    const BuiltinDescriptor d(8, 4);
    const Image a = smooth_random_image(rng, 40, 36);
    const Image b = a;
    const FeatureSet fa = d.describe(a, {2, 1, 32, 32}), fb = d.describe(b, {2, 1, 32, 32});
    EXPECT_EQ(fa.patches, fb.patches);
    EXPECT_EQ(fa.global, fb.global);
}

TEST(Descriptor, MatchesNaiveOracle) {
    Rng rng(2);
    const BuiltinDescriptor d(8, 4);
    for (int t = 0; t < 5; ++t) {
        const Image img = smooth_random_image(rng, 45, 41);
        const PixelRect r{5, 7, 32, 32};
        const FeatureSet fs = d.describe(img, r);
        std::vector<double> global(17, 0.0);
        for (int pr = 0; pr < 4; ++pr) {
            for (int pc = 0; pc < 4; ++pc) {
                const auto ref = naive_patch(img, pc * 8, pr * 8, 8, r.x0, r.y0, 32);
                const auto got = fs.patch(static_cast<std::size_t>(pr * 4 + pc));
                for (std::size_t k = 0; k < 17; ++k) {
                    EXPECT_NEAR(got[k], ref[k], 1e-12);
                    global[k] += ref[k] / 16.0;
                }
            }
        }
        double n = 0;
        for (double v : global) n += v * v;
        for (std::size_t k = 0; k < 17; ++k) EXPECT_NEAR(fs.global[k], global[k] / (std::sqrt(n) + 1e-8), 1e-12);
    }
}

TEST(Descriptor, VerticalEdgeFillsHorizontalGradientBins) {
    const BuiltinDescriptor d(16, 1);
    Image img(16, 16, 3, 0.1);
    for (int y = 0; y < 16; ++y)
        for (int x = 8; x < 16; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = 0.9;
    const FeatureSet fs = d.describe(img, {0, 0, 16, 16});
    const auto f = fs.patch(0);
    double hist = 0.0;
    for (int k = 3; k < 11; ++k) hist += f[static_cast<std::size_t>(k)];
    EXPECT_GT(hist, 0.0);
    EXPECT_NEAR(f[3] / hist, 1.0, 1e-12);  // bin 0 is centered on +x
    Image flipped = img;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c) flipped.at(x, y, c) = img.at(15 - x, y, c);
    const auto g = d.describe(flipped, {0, 0, 16, 16}).patch(0);
    EXPECT_GT(g[3 + 4], 0.0);  // -x gradient lands in the opposite bin
    EXPECT_EQ(g[3], 0.0);
}

TEST(Descriptor, BackwardMatchesFiniteDifferences) {
    Rng rng(3);
    const BuiltinDescriptor d(6, 3);
    for (int t = 0; t < 3; ++t) {
        Image img = smooth_random_image(rng, 22, 21);
        const PixelRect r{2, 1, 18, 18};
        std::vector<double> wp(9 * 17), wg(17);
        for (double& v : wp) v = rng.uniform(-1, 1);
        for (double& v : wg) v = rng.uniform(-1, 1);
        auto loss = [&] {
            const FeatureSet fs = d.describe(img, r);
            double s = 0;
            for (std::size_t i = 0; i < wp.size(); ++i) s += wp[i] * fs.patches[i];
            for (std::size_t i = 0; i < wg.size(); ++i) s += wg[i] * fs.global[i];
            return s;
        };
        const Image g = d.describe_backward(img, r, wp, wg);
        double worst = 0.0;
        int kinks = 0;
        for (std::size_t i = 0; i < img.data.size(); ++i) {
            // Triangular binning has kinks at bin centers. A pixel whose one-sided slopes disagree
            // sits on one and is skipped; there must be very few of them.
            const double x0 = img.data[i], h = 1e-6;
            const double f0 = loss();
            img.data[i] = x0 + h;
            const double fp = loss();
            img.data[i] = x0 - h;
            const double fm = loss();
            img.data[i] = x0;
            if (std::abs((fp - f0) - (f0 - fm)) / h > 1e-4) {
                ++kinks;
                continue;
            }
            worst = std::max(worst, rel_error(g.data[i], (fp - fm) / (2 * h), 1e-6));
        }
        EXPECT_LT(worst, 1e-4);
        EXPECT_LE(kinks, 24);  // each kink pixel taints its four neighbours in three channels
    }
}

TEST(Descriptor, RejectsBadCrops) {
    const BuiltinDescriptor d(8, 2);
    const Image img(20, 20, 3);
    EXPECT_THROW(d.describe(img, {5, 5, 16, 16}), InvalidInput);
    EXPECT_THROW(d.describe(img, {-1, 0, 16, 16}), InvalidInput);
    EXPECT_THROW(d.describe(img, {0, 0, 12, 12}), InvalidInput);
    EXPECT_THROW(d.describe(Image(20, 20, 1), {0, 0, 16, 16}), InvalidInput);
}

TEST(Descriptor, NormalizeVjpAtZeroIsZero) {
    const std::vector<double> x(5, 0.0), gy{1, 2, 3, 4, 5};
    std::vector<double> gx(5, 7.0);
    normalize_eps_vjp(x, gy, 1e-8, gx);
    for (double v : gx) EXPECT_EQ(v, 0.0);
}
