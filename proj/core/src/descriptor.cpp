#include "glowgs/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "glowgs/error.hpp"

namespace glowgs {

namespace {

constexpr int kZigZag[BuiltinDescriptor::kDctTerms][2] = {{0, 0}, {0, 1}, {1, 0}, {2, 0}, {1, 1}, {0, 2}};
constexpr double kBinWidth = 2.0 * std::numbers::pi / BuiltinDescriptor::kHistBins;

struct SoftBin {
    int k0 = 0;
    int k1 = 1;
    double w1 = 0.0;  // weight of k1; k0 gets 1 - w1
};

SoftBin soft_bin(double theta) {
    double beta = theta / kBinWidth;
    if (beta < 0.0) beta += BuiltinDescriptor::kHistBins;
    int k0 = static_cast<int>(std::floor(beta));
    double w1 = beta - k0;
    if (k0 >= BuiltinDescriptor::kHistBins) {
        k0 -= BuiltinDescriptor::kHistBins;
    }
    return {k0, (k0 + 1) % BuiltinDescriptor::kHistBins, w1};
}

// Luminance and clamped central-difference gradients over the crop.
struct CropFields {
    int size = 0;
    std::vector<double> lum, gx, gy;
};

CropFields crop_fields(const Image& image, const PixelRect& crop) {
    CropFields f;
    f.size = crop.width;
    const int n = crop.width;
    f.lum.resize(static_cast<std::size_t>(n) * n);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const int ix = crop.x0 + x, iy = crop.y0 + y;
            f.lum[static_cast<std::size_t>(y) * n + x] =
                (image.at(ix, iy, 0) + image.at(ix, iy, 1) + image.at(ix, iy, 2)) / 3.0;
        }
    }
    f.gx.resize(f.lum.size());
    f.gy.resize(f.lum.size());
    for (int y = 0; y < n; ++y) {
        const int ym = std::max(y - 1, 0), yp = std::min(y + 1, n - 1);
        for (int x = 0; x < n; ++x) {
            const int xm = std::max(x - 1, 0), xp = std::min(x + 1, n - 1);
            const std::size_t i = static_cast<std::size_t>(y) * n + x;
            f.gx[i] = 0.5 * (f.lum[static_cast<std::size_t>(y) * n + xp] - f.lum[static_cast<std::size_t>(y) * n + xm]);
            f.gy[i] = 0.5 * (f.lum[static_cast<std::size_t>(yp) * n + x] - f.lum[static_cast<std::size_t>(ym) * n + x]);
        }
    }
    return f;
}

void check_crop(const Image& image, const PixelRect& crop, int expected) {
    if (image.channels != 3) throw InvalidInput("descriptor expects a 3-channel image");
    if (crop.width != expected || crop.height != expected) {
        throw InvalidInput("descriptor crop must be " + std::to_string(expected) + "x" +
                           std::to_string(expected));
    }
    if (crop.x0 < 0 || crop.y0 < 0 || crop.x0 + crop.width > image.width ||
        crop.y0 + crop.height > image.height) {
        throw InvalidInput("descriptor crop out of image bounds");
    }
}

double normalize_eps(std::span<const double> x, std::span<double> y, double eps) {
    double n2 = 0.0;
    for (double v : x) n2 += v * v;
    const double n = std::sqrt(n2);
    const double inv = 1.0 / (n + eps);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * inv;
    return n;
}

// Unnormalized per-patch features in raster patch order.
std::vector<double> raw_patch_features(const Image& image, const PixelRect& crop, const CropFields& f,
                                       int ps, int grid, const std::vector<double>& dct_basis) {
    constexpr int kDim = BuiltinDescriptor::kDim;
    constexpr int kBins = BuiltinDescriptor::kHistBins;
    const int n = f.size;
    const double inv_px = 1.0 / (ps * ps);
    std::vector<double> raw(static_cast<std::size_t>(grid) * grid * kDim, 0.0);
    for (int pr = 0; pr < grid; ++pr) {
        for (int pc = 0; pc < grid; ++pc) {
            double* r = raw.data() + (static_cast<std::size_t>(pr) * grid + pc) * kDim;
            for (int y = 0; y < ps; ++y) {
                for (int x = 0; x < ps; ++x) {
                    const int cx = pc * ps + x, cy = pr * ps + y;
                    for (int c = 0; c < 3; ++c) r[c] += image.at(crop.x0 + cx, crop.y0 + cy, c);
                    const std::size_t i = static_cast<std::size_t>(cy) * n + cx;
                    const double m = std::sqrt(f.gx[i] * f.gx[i] + f.gy[i] * f.gy[i]);
                    if (m > 0.0) {
                        const SoftBin b = soft_bin(std::atan2(f.gy[i], f.gx[i]));
                        r[3 + b.k0] += m * (1.0 - b.w1);
                        r[3 + b.k1] += m * b.w1;
                    }
                    for (int k = 0; k < BuiltinDescriptor::kDctTerms; ++k) {
                        r[3 + kBins + k] += f.lum[i] * dct_basis[(static_cast<std::size_t>(k) * ps + y) * ps + x];
                    }
                }
            }
            for (int c = 0; c < 3; ++c) r[c] *= inv_px;
            for (int k = 0; k < kBins; ++k) r[3 + k] *= BuiltinDescriptor::kHistGain * inv_px;
        }
    }
    return raw;
}

}  // namespace

void normalize_eps_vjp(std::span<const double> x, std::span<const double> grad_y, double eps,
                       std::span<double> grad_x) {
    double n2 = 0.0, xg = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        n2 += x[i] * x[i];
        xg += x[i] * grad_y[i];
    }
    const double n = std::sqrt(n2);
    if (!(n > 0.0)) {
        for (double& g : grad_x) g = 0.0;
        return;
    }
    const double a = 1.0 / (n + eps);
    const double b = xg / (n * (n + eps) * (n + eps));
    for (std::size_t i = 0; i < x.size(); ++i) grad_x[i] = a * grad_y[i] - b * x[i];
}

BuiltinDescriptor::BuiltinDescriptor(int patch_size, int grid) : patch_size_(patch_size), grid_(grid) {
    if (patch_size < 3 || grid < 1) throw InvalidInput("descriptor patch size or grid too small");
    const int n = patch_size_;
    dct_basis_.resize(static_cast<std::size_t>(kDctTerms) * n * n);
    const double pi = std::numbers::pi;
    for (int k = 0; k < kDctTerms; ++k) {
        const int u = kZigZag[k][0], v = kZigZag[k][1];
        const double au = u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        const double av = v == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                dct_basis_[(static_cast<std::size_t>(k) * n + y) * n + x] =
                    au * av * std::cos(pi * (2 * y + 1) * u / (2.0 * n)) *
                    std::cos(pi * (2 * x + 1) * v / (2.0 * n)) / n;
            }
        }
    }
}

FeatureSet BuiltinDescriptor::describe(const Image& image, const PixelRect& crop) const {
    check_crop(image, crop, crop_size());
    const CropFields f = crop_fields(image, crop);
    const std::vector<double> raw = raw_patch_features(image, crop, f, patch_size_, grid_, dct_basis_);

    FeatureSet fs;
    fs.dim = kDim;
    fs.rows = grid_;
    fs.cols = grid_;
    fs.patches.assign(fs.patch_count() * kDim, 0.0);
    fs.global.assign(kDim, 0.0);
    for (std::size_t p = 0; p < fs.patch_count(); ++p) {
        std::span<double> out(fs.patches.data() + p * kDim, kDim);
        normalize_eps({raw.data() + p * kDim, static_cast<std::size_t>(kDim)}, out, kEps);
        for (int d = 0; d < kDim; ++d) fs.global[d] += out[d];
    }
    const double inv_p = 1.0 / static_cast<double>(fs.patch_count());
    for (double& v : fs.global) v *= inv_p;
    const std::vector<double> mean = fs.global;
    normalize_eps(mean, fs.global, kEps);
    return fs;
}

Image BuiltinDescriptor::describe_backward(const Image& image, const PixelRect& crop,
                                           std::span<const double> grad_patches,
                                           std::span<const double> grad_global) const {
    check_crop(image, crop, crop_size());
    const std::size_t npatch = static_cast<std::size_t>(grid_) * grid_;
    if (!grad_patches.empty() && grad_patches.size() != npatch * kDim) {
        throw InvalidInput("describe_backward: patch gradient has wrong size");
    }
    if (!grad_global.empty() && grad_global.size() != static_cast<std::size_t>(kDim)) {
        throw InvalidInput("describe_backward: global gradient has wrong size");
    }

    const CropFields f = crop_fields(image, crop);
    const int ps = patch_size_;
    const int n = f.size;
    const double inv_px = 1.0 / (ps * ps);

    const std::vector<double> raw = raw_patch_features(image, crop, f, ps, grid_, dct_basis_);
    std::vector<double> normed(npatch * kDim, 0.0);
    for (std::size_t p = 0; p < npatch; ++p) {
        normalize_eps({raw.data() + p * kDim, static_cast<std::size_t>(kDim)},
                      {normed.data() + p * kDim, static_cast<std::size_t>(kDim)}, kEps);
    }

    // Gradient with respect to normalized patch features.
    std::vector<double> g_normed(npatch * kDim, 0.0);
    if (!grad_patches.empty()) std::copy(grad_patches.begin(), grad_patches.end(), g_normed.begin());
    if (!grad_global.empty()) {
        std::vector<double> mean(kDim, 0.0), g_mean(kDim);
        for (std::size_t p = 0; p < npatch; ++p) {
            for (int d = 0; d < kDim; ++d) mean[d] += normed[p * kDim + d];
        }
        for (double& v : mean) v /= static_cast<double>(npatch);
        normalize_eps_vjp(mean, grad_global, kEps, g_mean);
        for (std::size_t p = 0; p < npatch; ++p) {
            for (int d = 0; d < kDim; ++d) g_normed[p * kDim + d] += g_mean[d] / static_cast<double>(npatch);
        }
    }

    Image grad(image.width, image.height, image.channels);
    std::vector<double> g_lum(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> g_raw(kDim);
    for (int pr = 0; pr < grid_; ++pr) {
        for (int pc = 0; pc < grid_; ++pc) {
            const std::size_t p = static_cast<std::size_t>(pr) * grid_ + pc;
            normalize_eps_vjp({raw.data() + p * kDim, static_cast<std::size_t>(kDim)},
                              {g_normed.data() + p * kDim, static_cast<std::size_t>(kDim)}, kEps, g_raw);
            for (int y = 0; y < ps; ++y) {
                for (int x = 0; x < ps; ++x) {
                    const int cx = pc * ps + x, cy = pr * ps + y;
                    for (int c = 0; c < 3; ++c) grad.at(crop.x0 + cx, crop.y0 + cy, c) += g_raw[c] * inv_px;
                    const std::size_t i = static_cast<std::size_t>(cy) * n + cx;
                    double gl = 0.0;
                    for (int k = 0; k < kDctTerms; ++k) {
                        gl += g_raw[3 + kHistBins + k] * dct_basis_[(static_cast<std::size_t>(k) * ps + y) * ps + x];
                    }
                    g_lum[i] += gl;

                    const double gx = f.gx[i], gy = f.gy[i];
                    const double m2 = gx * gx + gy * gy;
                    if (!(m2 > 0.0)) continue;
                    const double m = std::sqrt(m2);
                    const SoftBin b = soft_bin(std::atan2(gy, gx));
                    const double h0 = g_raw[3 + b.k0] * kHistGain * inv_px;
                    const double h1 = g_raw[3 + b.k1] * kHistGain * inv_px;
                    const double g_m = (1.0 - b.w1) * h0 + b.w1 * h1;
                    const double g_theta = m * (h1 - h0) / kBinWidth;
                    const double g_gx = g_m * gx / m - g_theta * gy / m2;
                    const double g_gy = g_m * gy / m + g_theta * gx / m2;
                    const int xm = std::max(cx - 1, 0), xp = std::min(cx + 1, n - 1);
                    const int ym = std::max(cy - 1, 0), yp = std::min(cy + 1, n - 1);
                    g_lum[static_cast<std::size_t>(cy) * n + xp] += 0.5 * g_gx;
                    g_lum[static_cast<std::size_t>(cy) * n + xm] -= 0.5 * g_gx;
                    g_lum[static_cast<std::size_t>(yp) * n + cx] += 0.5 * g_gy;
                    g_lum[static_cast<std::size_t>(ym) * n + cx] -= 0.5 * g_gy;
                }
            }
        }
    }
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double gl = g_lum[static_cast<std::size_t>(y) * n + x] / 3.0;
            for (int c = 0; c < 3; ++c) grad.at(crop.x0 + x, crop.y0 + y, c) += gl;
        }
    }
    return grad;
}

}  // namespace glowgs
