#include "glowgs/image.hpp"

#include <algorithm>
#include <cmath>

#include "glowgs/error.hpp"

namespace glowgs {

Image crop(const Image& img, const PixelRect& rect) {
    if (rect.x0 < 0 || rect.y0 < 0 || rect.width <= 0 || rect.height <= 0 ||
        rect.x0 + rect.width > img.width || rect.y0 + rect.height > img.height) {
        throw InvalidInput("crop rectangle out of image bounds");
    }
    Image out(rect.width, rect.height, img.channels);
    for (int y = 0; y < rect.height; ++y) {
        const double* src = &img.data[img.index(rect.x0, rect.y0 + y)];
        std::copy(src, src + static_cast<std::size_t>(rect.width) * img.channels,
                  &out.data[out.index(0, y)]);
    }
    return out;
}

void crop_backward(const Image& grad_crop, const PixelRect& rect, Image& grad_full) {
    for (int y = 0; y < rect.height; ++y) {
        for (int x = 0; x < rect.width; ++x) {
            for (int c = 0; c < grad_crop.channels; ++c) {
                grad_full.at(rect.x0 + x, rect.y0 + y, c) += grad_crop.at(x, y, c);
            }
        }
    }
}

namespace {

struct Tap {
    int i0, i1;
    double w0, w1;
};

std::vector<Tap> make_taps(int in_n, int out_n) {
    std::vector<Tap> taps(static_cast<std::size_t>(out_n));
    const double scale = static_cast<double>(in_n) / out_n;
    for (int o = 0; o < out_n; ++o) {
        double s = (o + 0.5) * scale - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(in_n - 1));
        const int i0 = static_cast<int>(std::floor(s));
        const int i1 = std::min(i0 + 1, in_n - 1);
        const double f = s - i0;
        taps[static_cast<std::size_t>(o)] = {i0, i1, 1.0 - f, f};
    }
    return taps;
}

}  // namespace

Image resize_bilinear(const Image& img, int out_w, int out_h) {
    if (img.empty() || out_w <= 0 || out_h <= 0) throw InvalidInput("resize of empty image");
    const auto tx = make_taps(img.width, out_w);
    const auto ty = make_taps(img.height, out_h);
    Image out(out_w, out_h, img.channels);
    for (int y = 0; y < out_h; ++y) {
        const Tap& a = ty[static_cast<std::size_t>(y)];
        for (int x = 0; x < out_w; ++x) {
            const Tap& b = tx[static_cast<std::size_t>(x)];
            for (int c = 0; c < img.channels; ++c) {
                out.at(x, y, c) = a.w0 * (b.w0 * img.at(b.i0, a.i0, c) + b.w1 * img.at(b.i1, a.i0, c)) +
                                  a.w1 * (b.w0 * img.at(b.i0, a.i1, c) + b.w1 * img.at(b.i1, a.i1, c));
            }
        }
    }
    return out;
}

Image resize_bilinear_backward(const Image& grad_out, int in_w, int in_h) {
    const auto tx = make_taps(in_w, grad_out.width);
    const auto ty = make_taps(in_h, grad_out.height);
    Image g(in_w, in_h, grad_out.channels);
    for (int y = 0; y < grad_out.height; ++y) {
        const Tap& a = ty[static_cast<std::size_t>(y)];
        for (int x = 0; x < grad_out.width; ++x) {
            const Tap& b = tx[static_cast<std::size_t>(x)];
            for (int c = 0; c < grad_out.channels; ++c) {
                const double v = grad_out.at(x, y, c);
                g.at(b.i0, a.i0, c) += a.w0 * b.w0 * v;
                g.at(b.i1, a.i0, c) += a.w0 * b.w1 * v;
                g.at(b.i0, a.i1, c) += a.w1 * b.w0 * v;
                g.at(b.i1, a.i1, c) += a.w1 * b.w1 * v;
            }
        }
    }
    return g;
}

std::pair<int, int> upscaled_size(int w, int h, int min_side) {
    const int short_side = std::min(w, h);
    if (short_side >= min_side) return {w, h};
    const double s = static_cast<double>(min_side) / short_side;
    const int nw = w == short_side ? min_side : static_cast<int>(std::lround(w * s));
    const int nh = h == short_side ? min_side : static_cast<int>(std::lround(h * s));
    return {nw, nh};
}

void clamp01(Image& img) {
    for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
}

}  // namespace glowgs

namespace glowgs {

std::size_t Mask::count() const noexcept {
    std::size_t n = 0;
    for (auto v : data) n += v != 0;
    return n;
}

Mask Mask::complement() const {
    Mask m = *this;
    for (auto& v : m.data) v = v != 0 ? 0 : 1;
    return m;
}

}  // namespace glowgs
