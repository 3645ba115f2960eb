#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace glowgs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kMaxShDegree = 2;

/// Number of SH basis functions for a degree.
constexpr int sh_basis_count(int degree) { return (degree + 1) * (degree + 1); }

/// One splat. Activations: scale = exp(log_scale), opacity = sigmoid(opacity_logit).
///
/// `sh` is laid out basis-major: sh[k * 3 + channel].
struct Gaussian3D {
    Vec3 mean = Vec3::Zero();
    Vec4 quat = Vec4(1.0, 0.0, 0.0, 0.0);  // (w, x, y, z)
    Vec3 log_scale = Vec3::Zero();
    double opacity_logit = 0.0;
    std::vector<double> sh = std::vector<double>(3, 0.0);

    int sh_degree() const;
    double opacity() const;
    Vec3 scale() const { return log_scale.array().exp(); }
};

/// Pinhole camera with a world-to-camera pose: x_cam = rot * x_world + trans.
/// Pixel (u, v) covers [u, u+1) x [v, v+1); its center is at (u + 0.5, v + 0.5).
struct Camera {
    int width = 0;
    int height = 0;
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    Mat3 rot = Mat3::Identity();
    Vec3 trans = Vec3::Zero();

    /// Camera center in world coordinates.
    Vec3 center() const { return -rot.transpose() * trans; }

    /// Throws InvalidInput unless the rotation is orthonormal with det +1 and focal lengths are positive.
    void validate(double tol = 1e-6) const;

    /// Camera looking from `eye` toward `target`, y axis pointing down in the image.
    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                          double fov_x_deg);

    /// Same pose with intrinsics and image size multiplied by `factor`.
    Camera scaled(double factor) const;
};

/// Screen-space footprint of a projected splat.
struct Gaussian2D {
    Vec2 mean2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Identity();
    double depth = 0.0;
};

struct ProjectionSettings {
    double near_plane = 0.01;
    double dilation = 0.3;     // px^2 added to the cov2d diagonal
    double cull_sigma = 3.0;
};

double sigmoid(double x);

Mat3 quat_to_rotation(const Vec4& q);

/// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
Mat3 build_covariance(const Mat3& rot, const Vec3& log_scale);

/// EWA projection. Returns nullopt when the splat is behind the near plane or its
/// cull_sigma footprint misses the image.
std::optional<Gaussian2D> project_gaussian(const Gaussian3D& g, const Camera& cam,
                                           const ProjectionSettings& settings = {});

/// Footprint radius in pixels used for culling and tile binning.
double footprint_radius(const Mat2& cov2d, double cull_sigma);

/// exp(-1/2 d^T cov2d^-1 d). Throws NumericalError if cov2d is not invertible.
double eval_gaussian2d(const Gaussian2D& g, const Vec2& x);

/// View-dependent color; degree-0 output is C0 * sh0 + 0.5, clamped at zero per channel.
Vec3 sh_color(std::span<const double> sh, const Vec3& view_dir);

/// SH coefficient value that makes the degree-0 color equal `rgb`.
Vec3 rgb_to_sh_dc(const Vec3& rgb);

// ---------------------------------------------------------------------------------------------
// Vector-Jacobian products. Each takes the forward inputs and dL/d(output) and returns
// dL/d(inputs).

/// dL/dq for the unnormalized quaternion q.
Vec4 quat_to_rotation_vjp(const Vec4& q, const Mat3& grad_rot);

struct CovarianceGrad {
    Mat3 rot;
    Vec3 log_scale;
};

/// grad_cov is treated as the gradient with respect to the full (non-symmetrized) matrix.
CovarianceGrad build_covariance_vjp(const Mat3& rot, const Vec3& log_scale, const Mat3& grad_cov);

struct ProjectionGrad {
    Vec3 mean;   // world-space mean
    Mat3 cov3d;  // full-matrix gradient for the world covariance
};

/// Backward of mean2d and cov2d with respect to the world mean and 3D covariance.
/// grad_cov2d is the full-matrix gradient (off-diagonals counted separately).
ProjectionGrad project_vjp(const Vec3& mean, const Mat3& cov3d, const Camera& cam,
                           const Vec2& grad_mean2d, const Mat2& grad_cov2d);

struct ShGrad {
    std::vector<double> sh;
    Vec3 view_dir = Vec3::Zero();
};

ShGrad sh_color_vjp(std::span<const double> sh, const Vec3& view_dir, const Vec3& grad_rgb);

/// dL/dx for y = x / |x|.
Vec3 normalize_vjp(const Vec3& x, const Vec3& grad_y);

}  // namespace glowgs
