#pragma once

#include <optional>

#include "glowgs/image.hpp"

namespace glowgs {

inline constexpr double kPsnrCap = 99.0;

/// SSIM window and constants (single scale, dynamic range 1).
struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

/// 10 log10(1 / MSE), capped at 99 dB. Throws InvalidInput on shape mismatch.
double psnr(const Image& a, const Image& b);

/// Mean SSIM over all valid window centers and channels.
double ssim(const Image& a, const Image& b, const SsimParams& params = {});

/// Per-center SSIM values, (W - window + 1) x (H - window + 1) x channels.
Image ssim_map(const Image& a, const Image& b, const SsimParams& params = {});

struct SsimWithGrad {
    double value = 0.0;
    Image grad_a;  // d value / d a
};

SsimWithGrad ssim_with_grad(const Image& a, const Image& b, const SsimParams& params = {});

struct RegionMetrics {
    std::size_t pixels = 0;
    std::size_t windows = 0;
    std::optional<double> psnr;
    std::optional<double> ssim;
};

struct EvalReport {
    double psnr = 0.0;
    double ssim = 0.0;
    std::optional<double> lpips;  // not computed; kept so serialized reports stay schema-stable
    std::optional<RegionMetrics> glow;
    std::optional<RegionMetrics> non_glow;
};

/// PSNR over the masked pixels and mean SSIM over window centers lying in the mask.
RegionMetrics region_metrics(const Image& a, const Image& b, const Mask& mask, const SsimParams& params = {});

/// Full-image metrics plus glow / non-glow breakdown.
EvalReport masked_eval(const Image& a, const Image& b, const Mask& glow_mask, const SsimParams& params = {});

EvalReport evaluate(const Image& a, const Image& b, const SsimParams& params = {});

}  // namespace glowgs
