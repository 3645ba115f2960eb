#include "glowgs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "glowgs/error.hpp"

namespace glowgs {

namespace {

void check_pair(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw InvalidInput("images differ in shape");
    if (a.empty()) throw InvalidInput("empty image");
}

std::vector<double> gaussian_window(const SsimParams& p) {
    std::vector<double> w(static_cast<std::size_t>(p.window));
    const double c = 0.5 * (p.window - 1);
    double s = 0.0;
    for (int i = 0; i < p.window; ++i) {
        w[static_cast<std::size_t>(i)] = std::exp(-(i - c) * (i - c) / (2.0 * p.sigma * p.sigma));
        s += w[static_cast<std::size_t>(i)];
    }
    for (double& v : w) v /= s;
    return w;
}

// Separable valid-mode correlation of one channel plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int ow = w - n + 1, oh = h - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[static_cast<std::size_t>(i)] * plane[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += k[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    }
    return out;
}

// Transpose of filter_valid: spreads center values back over their windows.
std::vector<double> filter_valid_transpose(const std::vector<double>& map, int w, int h, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int ow = w - n + 1, oh = h - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h, 0.0);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            const double v = map[static_cast<std::size_t>(y) * ow + x];
            for (int i = 0; i < n; ++i) tmp[static_cast<std::size_t>(y + i) * ow + x] += k[static_cast<std::size_t>(i)] * v;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(w) * h, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            const double v = tmp[static_cast<std::size_t>(y) * ow + x];
            for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(y) * w + x + i] += k[static_cast<std::size_t>(i)] * v;
        }
    }
    return out;
}

std::vector<double> channel_plane(const Image& img, int c) {
    std::vector<double> p(img.pixel_count());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = img.data[i * static_cast<std::size_t>(img.channels) + static_cast<std::size_t>(c)];
    return p;
}

struct SsimStats {
    std::vector<double> mx, my, sxx, syy, sxy;
};

SsimStats ssim_stats(const std::vector<double>& x, const std::vector<double>& y, int w, int h,
                     const std::vector<double>& k) {
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    SsimStats s;
    s.mx = filter_valid(x, w, h, k);
    s.my = filter_valid(y, w, h, k);
    s.sxx = filter_valid(xx, w, h, k);
    s.syy = filter_valid(yy, w, h, k);
    s.sxy = filter_valid(xy, w, h, k);
    for (std::size_t i = 0; i < s.mx.size(); ++i) {
        s.sxx[i] -= s.mx[i] * s.mx[i];
        s.syy[i] -= s.my[i] * s.my[i];
        s.sxy[i] -= s.mx[i] * s.my[i];
    }
    return s;
}

void check_ssim_size(const Image& a, const SsimParams& p) {
    if (a.width < p.window || a.height < p.window) {
        throw InvalidInput("image smaller than the " + std::to_string(p.window) + "x" + std::to_string(p.window) +
                           " SSIM window");
    }
}

double mse_over(const Image& a, const Image& b, const Mask* mask, std::size_t& count) {
    double s = 0.0;
    count = 0;
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            if (mask && !mask->at(x, y)) continue;
            ++count;
            for (int c = 0; c < a.channels; ++c) {
                const double d = a.at(x, y, c) - b.at(x, y, c);
                s += d * d;
            }
        }
    }
    return count == 0 ? 0.0 : s / (static_cast<double>(count) * a.channels);
}

double psnr_from_mse(double mse) {
    if (!(mse > 0.0)) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

}  // namespace

double psnr(const Image& a, const Image& b) {
    check_pair(a, b);
    std::size_t n = 0;
    return psnr_from_mse(mse_over(a, b, nullptr, n));
}

Image ssim_map(const Image& a, const Image& b, const SsimParams& params) {
    check_pair(a, b);
    check_ssim_size(a, params);
    const auto k = gaussian_window(params);
    const double c1 = params.k1 * params.k1, c2 = params.k2 * params.k2;
    const int ow = a.width - params.window + 1, oh = a.height - params.window + 1;
    Image out(ow, oh, a.channels);
    for (int c = 0; c < a.channels; ++c) {
        const SsimStats s = ssim_stats(channel_plane(a, c), channel_plane(b, c), a.width, a.height, k);
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * ow + x;
                const double num = (2.0 * s.mx[i] * s.my[i] + c1) * (2.0 * s.sxy[i] + c2);
                const double den = (s.mx[i] * s.mx[i] + s.my[i] * s.my[i] + c1) * (s.sxx[i] + s.syy[i] + c2);
                out.at(x, y, c) = num / den;
            }
        }
    }
    return out;
}

double ssim(const Image& a, const Image& b, const SsimParams& params) {
    const Image m = ssim_map(a, b, params);
    double s = 0.0;
    for (double v : m.data) s += v;
    return s / static_cast<double>(m.data.size());
}

SsimWithGrad ssim_with_grad(const Image& a, const Image& b, const SsimParams& params) {
    check_pair(a, b);
    check_ssim_size(a, params);
    const auto k = gaussian_window(params);
    const double c1 = params.k1 * params.k1, c2 = params.k2 * params.k2;
    const int ow = a.width - params.window + 1, oh = a.height - params.window + 1;
    const double inv_n = 1.0 / (static_cast<double>(ow) * oh * a.channels);

    SsimWithGrad out;
    out.grad_a = Image(a.width, a.height, a.channels);
    for (int c = 0; c < a.channels; ++c) {
        const auto x = channel_plane(a, c);
        const auto y = channel_plane(b, c);
        const SsimStats s = ssim_stats(x, y, a.width, a.height, k);
        const std::size_t nc = s.mx.size();
        std::vector<double> ga(nc), gb(nc), gc(nc);
        for (std::size_t i = 0; i < nc; ++i) {
            const double l_num = 2.0 * s.mx[i] * s.my[i] + c1;
            const double l_den = s.mx[i] * s.mx[i] + s.my[i] * s.my[i] + c1;
            const double c_num = 2.0 * s.sxy[i] + c2;
            const double c_den = s.sxx[i] + s.syy[i] + c2;
            const double val = (l_num * c_num) / (l_den * c_den);
            out.value += val * inv_n;
            // Partials of SSIM with respect to mu_x, sigma_x^2 and sigma_xy.
            const double d_mx = (2.0 * s.my[i] * c_num) / (l_den * c_den) - val * 2.0 * s.mx[i] / l_den;
            const double d_sxx = -val / c_den;
            const double d_sxy = 2.0 * l_num / (l_den * c_den);
            // mu_x = sum w x, sigma_x^2 = sum w x^2 - mu_x^2, sigma_xy = sum w x y - mu_x mu_y
            ga[i] = (d_mx - 2.0 * s.mx[i] * d_sxx - s.my[i] * d_sxy) * inv_n;
            gb[i] = d_sxx * inv_n;
            gc[i] = d_sxy * inv_n;
        }
        const auto ta = filter_valid_transpose(ga, a.width, a.height, k);
        const auto tb = filter_valid_transpose(gb, a.width, a.height, k);
        const auto tc = filter_valid_transpose(gc, a.width, a.height, k);
        for (std::size_t p = 0; p < x.size(); ++p) {
            out.grad_a.data[p * static_cast<std::size_t>(a.channels) + static_cast<std::size_t>(c)] =
                ta[p] + 2.0 * x[p] * tb[p] + y[p] * tc[p];
        }
    }
    return out;
}

RegionMetrics region_metrics(const Image& a, const Image& b, const Mask& mask, const SsimParams& params) {
    check_pair(a, b);
    if (mask.width != a.width || mask.height != a.height) throw InvalidInput("mask shape does not match images");
    RegionMetrics r;
    const double mse = mse_over(a, b, &mask, r.pixels);
    if (r.pixels > 0) r.psnr = psnr_from_mse(mse);

    const Image m = ssim_map(a, b, params);
    const int half = params.window / 2;
    double s = 0.0;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (!mask.at(x + half, y + half)) continue;
            ++r.windows;
            for (int c = 0; c < m.channels; ++c) s += m.at(x, y, c);
        }
    }
    if (r.windows > 0) r.ssim = s / (static_cast<double>(r.windows) * m.channels);
    return r;
}

EvalReport evaluate(const Image& a, const Image& b, const SsimParams& params) {
    EvalReport r;
    r.psnr = psnr(a, b);
    r.ssim = ssim(a, b, params);
    return r;
}

EvalReport masked_eval(const Image& a, const Image& b, const Mask& glow_mask, const SsimParams& params) {
    EvalReport r = evaluate(a, b, params);
    r.glow = region_metrics(a, b, glow_mask, params);
    r.non_glow = region_metrics(a, b, glow_mask.complement(), params);
    return r;
}

}  // namespace glowgs
