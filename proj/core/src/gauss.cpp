#include "glowgs/gauss.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>


#include "glowgs/error.hpp"

namespace glowgs {

namespace {

constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};

int degree_from_size(std::size_t n) {
    for (int d = 0; d <= kMaxShDegree; ++d) {
        if (n == static_cast<std::size_t>(3 * sh_basis_count(d))) return d;
    }
    throw InvalidInput("SH coefficient count " + std::to_string(n) + " does not match any degree");
}

// Real SH basis values for the given degree, in coefficient order.
void sh_basis(int degree, const Vec3& d, double* out) {
    out[0] = kC0;
    if (degree < 1) return;
    const double x = d.x(), y = d.y(), z = d.z();
    out[1] = -kC1 * y;
    out[2] = kC1 * z;
    out[3] = -kC1 * x;
    if (degree < 2) return;
    out[4] = kC2[0] * x * y;
    out[5] = kC2[1] * y * z;
    out[6] = kC2[2] * (2.0 * z * z - x * x - y * y);
    out[7] = kC2[3] * x * z;
    out[8] = kC2[4] * (x * x - y * y);
}

// Row k holds d(basis_k)/d(x, y, z).
void sh_basis_jacobian(int degree, const Vec3& d, Vec3* out) {
    out[0].setZero();
    if (degree < 1) return;
    const double x = d.x(), y = d.y(), z = d.z();
    out[1] = Vec3(0.0, -kC1, 0.0);
    out[2] = Vec3(0.0, 0.0, kC1);
    out[3] = Vec3(-kC1, 0.0, 0.0);
    if (degree < 2) return;
    out[4] = kC2[0] * Vec3(y, x, 0.0);
    out[5] = kC2[1] * Vec3(0.0, z, y);
    out[6] = kC2[2] * Vec3(-2.0 * x, -2.0 * y, 4.0 * z);
    out[7] = kC2[3] * Vec3(z, 0.0, x);
    out[8] = kC2[4] * Vec3(2.0 * x, -2.0 * y, 0.0);
}

}  // namespace

int Gaussian3D::sh_degree() const { return degree_from_size(sh.size()); }

double Gaussian3D::opacity() const { return sigmoid(opacity_logit); }

void Camera::validate(double tol) const {
    if (width <= 0 || height <= 0) throw InvalidInput("camera image size must be positive");
    if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidInput("camera focal lengths must be positive");
    if (!rot.allFinite() || !trans.allFinite()) throw InvalidInput("camera pose is not finite");
    if ((rot * rot.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) {
        throw InvalidInput("camera rotation is not orthonormal");
    }
    if (std::abs(rot.determinant() - 1.0) > tol) {
        throw InvalidInput("camera rotation determinant is not +1");
    }
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                       double fov_x_deg) {
    const Vec3 forward = (target - eye).normalized();
    const Vec3 right = (-up).cross(forward).normalized();
    const Vec3 down = forward.cross(right);
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.rot.row(0) = right.transpose();
    cam.rot.row(1) = down.transpose();
    cam.rot.row(2) = forward.transpose();
    cam.trans = -cam.rot * eye;
    cam.fx = 0.5 * width / std::tan(0.5 * fov_x_deg * std::numbers::pi / 180.0);
    cam.fy = cam.fx;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    return cam;
}

Camera Camera::scaled(double factor) const {
    Camera c = *this;
    c.width = static_cast<int>(std::lround(width * factor));
    c.height = static_cast<int>(std::lround(height * factor));
    c.fx *= factor;
    c.fy *= factor;
    c.cx *= factor;
    c.cy *= factor;
    return c;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Mat3 quat_to_rotation(const Vec4& q) {
    const double n = q.norm();
    if (!(n > 1e-12)) throw InvalidInput("quaternion has zero norm");
    const Vec4 u = q / n;
    const double w = u[0], x = u[1], y = u[2], z = u[3];
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

Mat3 build_covariance(const Mat3& rot, const Vec3& log_scale) {
    const Mat3 m = rot * log_scale.array().exp().matrix().asDiagonal();
    return m * m.transpose();
}

double footprint_radius(const Mat2& cov2d, double cull_sigma) {
    const double mid = 0.5 * (cov2d(0, 0) + cov2d(1, 1));
    const double half_diff = 0.5 * (cov2d(0, 0) - cov2d(1, 1));
    const double off = 0.5 * (cov2d(0, 1) + cov2d(1, 0));
    const double lambda_max = mid + std::sqrt(half_diff * half_diff + off * off);
    return cull_sigma * std::sqrt(std::max(lambda_max, 0.0));
}

std::optional<Gaussian2D> project_gaussian(const Gaussian3D& g, const Camera& cam,
                                           const ProjectionSettings& settings) {
    const Vec3 t = cam.rot * g.mean + cam.trans;
    if (!(t.z() > settings.near_plane)) return std::nullopt;
    const double iz = 1.0 / t.z();
    Eigen::Matrix<double, 2, 3> jac;
    jac << cam.fx * iz, 0.0, -cam.fx * t.x() * iz * iz,
        0.0, cam.fy * iz, -cam.fy * t.y() * iz * iz;
    const Eigen::Matrix<double, 2, 3> tw = jac * cam.rot;
    const Mat3 cov3d = build_covariance(quat_to_rotation(g.quat), g.log_scale);

    Gaussian2D out;
    out.mean2d = Vec2(cam.fx * t.x() * iz + cam.cx, cam.fy * t.y() * iz + cam.cy);
    out.cov2d = tw * cov3d * tw.transpose();
    out.cov2d(0, 0) += settings.dilation;
    out.cov2d(1, 1) += settings.dilation;
    out.depth = t.z();

    const double r = footprint_radius(out.cov2d, settings.cull_sigma);
    if (out.mean2d.x() + r < 0.0 || out.mean2d.x() - r > cam.width ||
        out.mean2d.y() + r < 0.0 || out.mean2d.y() - r > cam.height) {
        return std::nullopt;
    }
    return out;
}

double eval_gaussian2d(const Gaussian2D& g, const Vec2& x) {
    const double det = g.cov2d.determinant();
    if (!(det > 0.0) || !std::isfinite(det)) {
        throw NumericalError("cov2d is not invertible (det = " + std::to_string(det) + ")");
    }
    const Vec2 d = x - g.mean2d;
    const double a = g.cov2d(1, 1) / det;
    const double b = -0.5 * (g.cov2d(0, 1) + g.cov2d(1, 0)) / det;
    const double c = g.cov2d(0, 0) / det;
    const double power = -0.5 * (a * d.x() * d.x() + 2.0 * b * d.x() * d.y() + c * d.y() * d.y());
    return std::exp(std::min(power, 0.0));
}

Vec3 sh_color(std::span<const double> sh, const Vec3& view_dir) {
    const int degree = degree_from_size(sh.size());
    double basis[9];
    sh_basis(degree, view_dir, basis);
    Vec3 rgb = Vec3::Constant(0.5);
    for (int k = 0; k < sh_basis_count(degree); ++k) {
        for (int c = 0; c < 3; ++c) rgb[c] += basis[k] * sh[static_cast<std::size_t>(k * 3 + c)];
    }
    return rgb.cwiseMax(0.0);
}

Vec3 rgb_to_sh_dc(const Vec3& rgb) { return (rgb.array() - 0.5) / kC0; }

Vec4 quat_to_rotation_vjp(const Vec4& q, const Mat3& g) {
    const double n = q.norm();
    if (!(n > 1e-12)) throw InvalidInput("quaternion has zero norm");
    const Vec4 u = q / n;
    const double w = u[0], x = u[1], y = u[2], z = u[3];
    Mat3 dw, dx, dy, dz;
    dw << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
    dx << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x;
    dy << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y;
    dz << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0;
    const Vec4 gu(g.cwiseProduct(dw).sum(), g.cwiseProduct(dx).sum(), g.cwiseProduct(dy).sum(),
                  g.cwiseProduct(dz).sum());
    return (gu - u * u.dot(gu)) / n;
}

CovarianceGrad build_covariance_vjp(const Mat3& rot, const Vec3& log_scale, const Mat3& grad_cov) {
    const Vec3 s = log_scale.array().exp();
    const Mat3 m = rot * s.asDiagonal();
    const Mat3 gm = (grad_cov + grad_cov.transpose()) * m;
    CovarianceGrad out;
    out.rot = gm * s.asDiagonal();
    for (int j = 0; j < 3; ++j) out.log_scale[j] = gm.col(j).dot(rot.col(j)) * s[j];
    return out;
}

ProjectionGrad project_vjp(const Vec3& mean, const Mat3& cov3d, const Camera& cam,
                           const Vec2& grad_mean2d, const Mat2& grad_cov2d) {
    const Vec3 t = cam.rot * mean + cam.trans;
    const double iz = 1.0 / t.z();
    const double iz2 = iz * iz;
    const double iz3 = iz2 * iz;
    Eigen::Matrix<double, 2, 3> jac;
    jac << cam.fx * iz, 0.0, -cam.fx * t.x() * iz2,
        0.0, cam.fy * iz, -cam.fy * t.y() * iz2;
    const Eigen::Matrix<double, 2, 3> tw = jac * cam.rot;

    ProjectionGrad out;
    out.cov3d = tw.transpose() * grad_cov2d * tw;
    const Eigen::Matrix<double, 2, 3> g_tw =
        grad_cov2d * tw * cov3d.transpose() + grad_cov2d.transpose() * tw * cov3d;
    const Eigen::Matrix<double, 2, 3> g_j = g_tw * cam.rot.transpose();

    Vec3 g_t = Vec3::Zero();
    // mean2d = (fx x / z + cx, fy y / z + cy)
    g_t.x() += grad_mean2d.x() * cam.fx * iz;
    g_t.y() += grad_mean2d.y() * cam.fy * iz;
    g_t.z() += -grad_mean2d.x() * cam.fx * t.x() * iz2 - grad_mean2d.y() * cam.fy * t.y() * iz2;
    // Jacobian entries
    g_t.z() += g_j(0, 0) * (-cam.fx * iz2);
    g_t.x() += g_j(0, 2) * (-cam.fx * iz2);
    g_t.z() += g_j(0, 2) * (2.0 * cam.fx * t.x() * iz3);
    g_t.z() += g_j(1, 1) * (-cam.fy * iz2);
    g_t.y() += g_j(1, 2) * (-cam.fy * iz2);
    g_t.z() += g_j(1, 2) * (2.0 * cam.fy * t.y() * iz3);

    out.mean = cam.rot.transpose() * g_t;
    return out;
}

ShGrad sh_color_vjp(std::span<const double> sh, const Vec3& view_dir, const Vec3& grad_rgb) {
    const int degree = degree_from_size(sh.size());
    const int nb = sh_basis_count(degree);
    double basis[9];
    sh_basis(degree, view_dir, basis);
    Vec3 raw = Vec3::Constant(0.5);
    for (int k = 0; k < nb; ++k) {
        for (int c = 0; c < 3; ++c) raw[c] += basis[k] * sh[static_cast<std::size_t>(k * 3 + c)];
    }
    Vec3 g = grad_rgb;
    for (int c = 0; c < 3; ++c) {
        if (raw[c] < 0.0) g[c] = 0.0;
    }
    ShGrad out;
    out.sh.assign(sh.size(), 0.0);
    Vec3 jac[9];
    sh_basis_jacobian(degree, view_dir, jac);
    for (int k = 0; k < nb; ++k) {
        double coeff_dot = 0.0;
        for (int c = 0; c < 3; ++c) {
            out.sh[static_cast<std::size_t>(k * 3 + c)] = basis[k] * g[c];
            coeff_dot += sh[static_cast<std::size_t>(k * 3 + c)] * g[c];
        }
        out.view_dir += coeff_dot * jac[k];
    }
    return out;
}

Vec3 normalize_vjp(const Vec3& x, const Vec3& grad_y) {
    const double n = x.norm();
    if (!(n > 0.0)) return Vec3::Zero();
    const Vec3 y = x / n;
    return (grad_y - y * y.dot(grad_y)) / n;
}

}  // namespace glowgs
