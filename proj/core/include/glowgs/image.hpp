#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <span>
#include <vector>

namespace glowgs {

/// Interleaved row-major image with linear-intensity samples.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c = 3, double fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {}

    bool empty() const noexcept { return data.empty(); }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width) * height; }
    std::size_t index(int x, int y, int c = 0) const noexcept {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    double& at(int x, int y, int c = 0) noexcept { return data[index(x, y, c)]; }
    double at(int x, int y, int c = 0) const noexcept { return data[index(x, y, c)]; }

    bool same_shape(const Image& o) const noexcept {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

/// Axis-aligned pixel rectangle.
struct PixelRect {
    int x0 = 0;
    int y0 = 0;
    int width = 0;
    int height = 0;
};

Image crop(const Image& img, const PixelRect& rect);

/// Adds `grad_crop` into the `rect` window of `grad_full`.
void crop_backward(const Image& grad_crop, const PixelRect& rect, Image& grad_full);

/// Bilinear resampling with half-pixel centers and clamped borders.
Image resize_bilinear(const Image& img, int out_w, int out_h);

/// Transpose of resize_bilinear: maps a gradient on the resized image back to the source.
Image resize_bilinear_backward(const Image& grad_out, int in_w, int in_h);

/// Returns the (width, height) obtained by scaling so that the short side is at least `min_side`.
/// Images already large enough keep their size.
std::pair<int, int> upscaled_size(int w, int h, int min_side);

void clamp01(Image& img);

}  // namespace glowgs

namespace glowgs {

/// Row-major boolean mask.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int w, int h, bool fill = false)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

    bool at(int x, int y) const noexcept { return data[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) noexcept { data[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    std::size_t count() const noexcept;
    Mask complement() const;
};

}  // namespace glowgs
