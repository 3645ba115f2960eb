#include "glowgs/losses.hpp"

#include <cmath>

#include "glowgs/error.hpp"
#include "glowgs/metrics.hpp"

namespace glowgs {

LossWithGrad original_loss(const Image& render, const Image& target) {
    if (!render.same_shape(target)) throw InvalidInput("original_loss: render and target differ in shape");
    constexpr double kL1Weight = 0.8;
    constexpr double kSsimWeight = 0.2;

    LossWithGrad out;
    out.grad = Image(render.width, render.height, render.channels);
    const double inv_n = 1.0 / static_cast<double>(render.data.size());
    double l1 = 0.0;
    for (std::size_t i = 0; i < render.data.size(); ++i) {
        const double d = render.data[i] - target.data[i];
        l1 += std::abs(d);
        out.grad.data[i] = kL1Weight * inv_n * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
    }
    l1 *= inv_n;
    const SsimWithGrad s = ssim_with_grad(render, target);
    out.value = kL1Weight * l1 + kSsimWeight * (1.0 - s.value);
    for (std::size_t i = 0; i < render.data.size(); ++i) out.grad.data[i] -= kSsimWeight * s.grad_a.data[i];
    return out;
}

}  // namespace glowgs
