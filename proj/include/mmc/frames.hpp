#pragma once

// Park transformations at +w, -2w and the 3w zero-sequence frame, the
// frame-coupling matrices, and element-wise three-phase algebra.
//
// Convention: amplitude-invariant (2/3 on d and q, 1/3 on z). For a frame
// rotating at k*w with angle theta = k*w*t the rows are
//
//   d:  2/3 [cos(theta), cos(theta - 2pi/3), cos(theta + 2pi/3)]
//   q:  2/3 sgn(k) [sin(theta), sin(theta - 2pi/3), sin(theta + 2pi/3)]
//   z:  1/3 [1, 1, 1]
//
// so that P * d(P^-1)/dt = |k| Jw for both the +w and the -2w frame.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mmc {

struct Vec3Abc {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    [[nodiscard]] double sum() const { return a + b + c; }
    [[nodiscard]] double mean() const { return (a + b + c) / 3.0; }
    [[nodiscard]] double operator[](int i) const { return i == 0 ? a : (i == 1 ? b : c); }

    Vec3Abc& operator+=(const Vec3Abc& o) { a += o.a; b += o.b; c += o.c; return *this; }
    Vec3Abc& operator-=(const Vec3Abc& o) { a -= o.a; b -= o.b; c -= o.c; return *this; }
    Vec3Abc& operator*=(double s) { a *= s; b *= s; c *= s; return *this; }

    bool operator==(const Vec3Abc&) const = default;

    static Vec3Abc uniform(double v) { return {v, v, v}; }
};

inline Vec3Abc operator+(Vec3Abc x, const Vec3Abc& y) { return x += y; }
inline Vec3Abc operator-(Vec3Abc x, const Vec3Abc& y) { return x -= y; }
inline Vec3Abc operator*(Vec3Abc x, double s) { return x *= s; }
inline Vec3Abc operator*(double s, Vec3Abc x) { return x *= s; }
inline Vec3Abc operator/(Vec3Abc x, double s) { return x *= (1.0 / s); }
inline Vec3Abc operator-(const Vec3Abc& x) { return {-x.a, -x.b, -x.c}; }

/// Element-wise product.
inline Vec3Abc ewise(const Vec3Abc& x, const Vec3Abc& y) { return {x.a * y.a, x.b * y.b, x.c * y.c}; }

/// dqz components in a frame rotating at K times the grid frequency. The
/// harmonic is part of the type, so vectors from different frames cannot be
/// combined by accident.
template <int K>
struct Dqz {
    static_assert(K == 1 || K == -2, "supported rotating frames are +w and -2w");
    static constexpr int harmonic = K;

    double d = 0.0;
    double q = 0.0;
    double z = 0.0;

    Dqz& operator+=(const Dqz& o) { d += o.d; q += o.q; z += o.z; return *this; }
    Dqz& operator-=(const Dqz& o) { d -= o.d; q -= o.q; z -= o.z; return *this; }
    Dqz& operator*=(double s) { d *= s; q *= s; z *= s; return *this; }

    bool operator==(const Dqz&) const = default;
};

template <int K> Dqz<K> operator+(Dqz<K> x, const Dqz<K>& y) { return x += y; }
template <int K> Dqz<K> operator-(Dqz<K> x, const Dqz<K>& y) { return x -= y; }
template <int K> Dqz<K> operator*(Dqz<K> x, double s) { return x *= s; }
template <int K> Dqz<K> operator*(double s, Dqz<K> x) { return x *= s; }

using DqzW = Dqz<1>;
using Dqz2W = Dqz<-2>;

/// Zero-sequence quantity referred to the 3w frame.
struct Vec2Z {
    double zd = 0.0;
    double zq = 0.0;
    bool operator==(const Vec2Z&) const = default;
};

class FrameError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline void check_harmonic(int k)
{
    if (k != 1 && k != -2) {
        throw FrameError("unsupported rotating frame harmonic " + std::to_string(k));
    }
}

/// Maps an angle to [-pi, pi] so the three phase angles keep an exact
/// 120 degree spacing after rounding.
inline double wrap_angle(double theta) { return std::remainder(theta, 2.0 * std::numbers::pi); }

/// Forward Park matrix for harmonic k at angle theta (= k*w*t).
inline Eigen::Matrix3d park_matrix(int k, double theta)
{
    check_harmonic(k);
    theta = wrap_angle(theta);
    constexpr double shift = 2.0 * std::numbers::pi / 3.0;
    const double s = k > 0 ? 1.0 : -1.0;
    Eigen::Matrix3d m;
    for (int n = 0; n < 3; ++n) {
        const double ang = theta - shift * n;
        m(0, n) = 2.0 / 3.0 * std::cos(ang);
        m(1, n) = 2.0 / 3.0 * s * std::sin(ang);
        m(2, n) = 1.0 / 3.0;
    }
    return m;
}

/// Inverse Park matrix; columns are [cos, sgn(k) sin, 1].
inline Eigen::Matrix3d inverse_park_matrix(int k, double theta)
{
    check_harmonic(k);
    theta = wrap_angle(theta);
    constexpr double shift = 2.0 * std::numbers::pi / 3.0;
    const double s = k > 0 ? 1.0 : -1.0;
    Eigen::Matrix3d m;
    for (int n = 0; n < 3; ++n) {
        const double ang = theta - shift * n;
        m(n, 0) = std::cos(ang);
        m(n, 1) = s * std::sin(ang);
        m(n, 2) = 1.0;
    }
    return m;
}

template <int K>
Dqz<K> to_dqz(const Vec3Abc& x, double theta)
{
    theta = wrap_angle(theta);
    constexpr double shift = 2.0 * std::numbers::pi / 3.0;
    constexpr double s = K > 0 ? 1.0 : -1.0;
    const double ca = std::cos(theta), cb = std::cos(theta - shift), cc = std::cos(theta + shift);
    const double sa = std::sin(theta), sb = std::sin(theta - shift), sc = std::sin(theta + shift);
    return {2.0 / 3.0 * (ca * x.a + cb * x.b + cc * x.c),
            2.0 / 3.0 * s * (sa * x.a + sb * x.b + sc * x.c),
            (x.a + x.b + x.c) / 3.0};
}

template <int K>
Vec3Abc to_abc(const Dqz<K>& v, double theta)
{
    theta = wrap_angle(theta);
    constexpr double shift = 2.0 * std::numbers::pi / 3.0;
    constexpr double s = K > 0 ? 1.0 : -1.0;
    return {v.d * std::cos(theta) + s * v.q * std::sin(theta) + v.z,
            v.d * std::cos(theta - shift) + s * v.q * std::sin(theta - shift) + v.z,
            v.d * std::cos(theta + shift) + s * v.q * std::sin(theta + shift) + v.z};
}

enum class Coupling { W, W2, W3, G };

/// Jw, J2w = 2 Jw, J3w and JG = blockdiag(Jw[0:2,0:2], J3w).
inline Eigen::MatrixXd coupling_matrix(Coupling kind, double omega)
{
    switch (kind) {
        case Coupling::W:
        case Coupling::W2: {
            const double w = kind == Coupling::W ? omega : 2.0 * omega;
            Eigen::MatrixXd j = Eigen::MatrixXd::Zero(3, 3);
            j(0, 1) = w;
            j(1, 0) = -w;
            return j;
        }
        case Coupling::W3: {
            Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2, 2);
            j(0, 1) = -3.0 * omega;
            j(1, 0) = 3.0 * omega;
            return j;
        }
        case Coupling::G: {
            Eigen::MatrixXd j = Eigen::MatrixXd::Zero(4, 4);
            j(0, 1) = omega;
            j(1, 0) = -omega;
            j(2, 3) = -3.0 * omega;
            j(3, 2) = 3.0 * omega;
            return j;
        }
    }
    throw FrameError("unknown coupling kind");
}

/// 3w rotation used to build the virtual alpha-beta zero-sequence pair.
/// Symmetric and involutory.
inline Eigen::Matrix2d t3w(double theta3)
{
    Eigen::Matrix2d t;
    t << std::cos(theta3), std::sin(theta3),
         std::sin(theta3), -std::cos(theta3);
    return t;
}

}  // namespace mmc
