#pragma once

#include "glowgs/image.hpp"

namespace glowgs {

struct LossWithGrad {
    double value = 0.0;
    Image grad;  // d value / d render
};

/// Reconstruction loss 0.8 * L1 + 0.2 * (1 - SSIM) between a render and its target.
LossWithGrad original_loss(const Image& render, const Image& target);

}  // namespace glowgs
