#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "glowgs/image.hpp"

namespace glowgs {

/// Patch-grid features of one crop plus a global summary vector.
struct FeatureSet {
    int dim = 0;
    int rows = 0;
    int cols = 0;
    std::uint32_t source_view = 0;
    std::vector<double> global;   // dim
    std::vector<double> patches;  // rows * cols * dim, raster order

    std::size_t patch_count() const noexcept { return static_cast<std::size_t>(rows) * cols; }
    std::span<const double> patch(std::size_t p) const {
        return {patches.data() + p * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
};

/// Anything that maps an image crop to a FeatureSet.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::string name() const = 0;
    virtual int dim() const = 0;
    /// Side length of the square crop the extractor consumes.
    virtual int crop_size() const = 0;
    /// Throws InvalidInput when the crop does not fit inside the image.
    virtual FeatureSet describe(const Image& image, const PixelRect& crop) const = 0;
};

/// Deterministic, differentiable hand-built descriptor.
///
/// Per patch: mean RGB (3), magnitude-weighted soft orientation histogram of luminance
/// gradients (8 bins over the full circle, bin 0 centred on +x), and the first six zig-zag
/// DCT-II coefficients of luminance (6), L2-normalized with epsilon 1e-8. Luminance is the
/// channel mean; DCT coefficients are orthonormal DCT-II values divided by the patch side so
/// the DC term equals mean luminance.
class BuiltinDescriptor final : public FeatureExtractor {
public:
    static constexpr int kDim = 17;
    static constexpr int kHistBins = 8;
    static constexpr int kDctTerms = 6;
    static constexpr double kEps = 1e-8;
    static constexpr double kHistGain = 4.0;

    explicit BuiltinDescriptor(int patch_size = 16, int grid = 16);

    std::string name() const override { return "builtin"; }
    int dim() const override { return kDim; }
    int crop_size() const override { return patch_size_ * grid_; }
    int patch_size() const noexcept { return patch_size_; }
    int grid() const noexcept { return grid_; }

    FeatureSet describe(const Image& image, const PixelRect& crop) const override;

    /// Gradient of <grad_patches, patches> + <grad_global, global> with respect to `image`.
    /// Either span may be empty. The result has the shape of `image` and is zero outside `crop`.
    Image describe_backward(const Image& image, const PixelRect& crop,
                            std::span<const double> grad_patches,
                            std::span<const double> grad_global) const;

private:
    int patch_size_;
    int grid_;
    std::vector<double> dct_basis_;  // kDctTerms * patch_size^2
};

/// y = x / (|x| + eps); returns dL/dx. At x = 0 the gradient is defined as zero.
void normalize_eps_vjp(std::span<const double> x, std::span<const double> grad_y, double eps,
                       std::span<double> grad_x);

}  // namespace glowgs
