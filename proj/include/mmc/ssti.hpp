#pragma once

// Twelve-state dqz model whose solution is constant in steady state.
//
// Delta variables live in the +w frame, Sigma variables in the -2w frame, and
// the zero sequence of the capacitor-voltage difference (a 3w single-phase
// signal) is carried as the constant pair (Zd, Zq) via a virtual quadrature
// companion. The zero-sequence modulation difference is parameterised the
// same way as a third-harmonic injection. All terms that oscillate at 6w after
// the frame changes are dropped; the arm-averaged model keeps them.
//
// The matrices below are the period averages of the frame-projected
// arm-averaged equations under the convention documented in frames.hpp.

#include "mmc/frames.hpp"
#include "mmc/params.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace mmc {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using SstiVector = Eigen::Matrix<double, 12, 1>;

struct SstiState {
    Vec4 v_c_delta = Vec4::Zero();  // V: d, q, Zd, Zq
    Vec3 v_c_sigma = Vec3::Zero();  // V: d, q, z
    Vec3 i_sigma = Vec3::Zero();    // A: d, q, z
    Vec2 i_delta = Vec2::Zero();    // A: d, q

    static constexpr int size = 12;

    [[nodiscard]] SstiVector flat() const
    {
        SstiVector x;
        x << v_c_delta, v_c_sigma, i_sigma, i_delta;
        return x;
    }

    static SstiState from_flat(const SstiVector& x)
    {
        SstiState s;
        s.v_c_delta = x.segment<4>(0);
        s.v_c_sigma = x.segment<3>(4);
        s.i_sigma = x.segment<3>(7);
        s.i_delta = x.segment<2>(10);
        return s;
    }
};

/// The seven control inputs: m_sigma (d, q, z) and m_delta (d, q, Zd, Zq).
struct Modulation {
    Vec3 sigma = Vec3(0.0, 0.0, 1.0);
    Vec4 delta = Vec4::Zero();
};

struct SstiInputs {
    Modulation m;
    Vec2 v_g = Vec2::Zero();  // V, dq in the +w frame
    double v_dc = 0.0;        // V
};

/// Zero-sequence modulation difference as a third-harmonic injection.
inline double m_delta_z_waveform(const Vec2& m_z, double theta3)
{
    return m_z(0) * std::cos(theta3) + m_z(1) * std::sin(theta3);
}

/// Rebuilds the stationary zero-sequence voltage difference from (Zd, Zq).
inline double reconstruct_vcdz(const Vec2& v_z, double theta3)
{
    return v_z(0) * std::cos(theta3) + v_z(1) * std::sin(theta3);
}

namespace detail {

inline Eigen::Matrix3d sigma_sigma_matrix(const Vec3& ms)
{
    Eigen::Matrix3d b;
    b << 2 * ms(2), 0.0, 2 * ms(0),
         0.0, 2 * ms(2), 2 * ms(1),
         ms(0), ms(1), 2 * ms(2);
    return b;
}

}  // namespace detail

/// Modulated voltage driving the circulating current, -2w frame.
inline Vec3 vm_sigma_dqz(const Modulation& m, const Vec3& v_c_sigma, const Vec4& v_c_delta)
{
    const Vec4& md = m.delta;
    Eigen::Matrix<double, 3, 4> c;
    c << md(0) + md(2), md(3) - md(1), md(0), md(1),
         md(1) + md(3), md(0) - md(2), -md(1), md(0),
         md(0), md(1), md(2), md(3);
    return 0.25 * (detail::sigma_sigma_matrix(m.sigma) * v_c_sigma + c * v_c_delta);
}

/// Modulated voltage driving the grid current, +w frame (dq only).
inline Vec2 vm_delta_dq(const Modulation& m, const Vec3& v_c_sigma, const Vec4& v_c_delta)
{
    const Vec3& ms = m.sigma;
    const Vec4& md = m.delta;
    Eigen::Matrix<double, 2, 3> b;
    b << -md(0) - md(2), -md(1) - md(3), -2 * md(0),
         md(1) - md(3), -md(0) + md(2), -2 * md(1);
    Eigen::Matrix<double, 2, 4> c;
    c << -ms(0) - 2 * ms(2), -ms(1), -ms(0), -ms(1),
         -ms(1), -2 * ms(2) + ms(0), ms(1), -ms(0);
    return 0.25 * (b * v_c_sigma + c * v_c_delta);
}

inline SstiState ssti_derivatives(const SstiState& s, const SstiInputs& u, const MmcParams& p)
{
    const double w = p.omega();
    const Vec3& ms = u.m.sigma;
    const Vec4& md = u.m.delta;

    SstiState d;

    // Capacitor voltage difference. The dq pair rotates with -Jw; the (Zd, Zq)
    // pair is referred to a frame defined by the reconstruction
    // vz = Zd cos(3wt) + Zq sin(3wt) and therefore rotates with +J3w.
    {
        Eigen::Matrix<double, 4, 2> b;
        b << ms(0) + 2 * ms(2), ms(1),
             ms(1), -ms(0) + 2 * ms(2),
             ms(0), -ms(1),
             ms(1), ms(0);
        Eigen::Matrix<double, 4, 3> c;
        c << md(0) + md(2), md(1) + md(3), 2 * md(0),
             -md(1) + md(3), md(0) - md(2), 2 * md(1),
             md(0), -md(1), 2 * md(2),
             md(1), md(0), 2 * md(3);
        const Vec4& v = s.v_c_delta;
        const Vec4 rotation(-w * v(1), w * v(0), -3.0 * w * v(3), 3.0 * w * v(2));
        d.v_c_delta = rotation + (b * s.i_delta / 8.0 + c * s.i_sigma / 4.0) / p.c_arm;
    }

    // Capacitor voltage sum.
    {
        Eigen::Matrix<double, 3, 2> c;
        c << md(0) + md(2), -md(1) + md(3),
             md(1) + md(3), md(0) - md(2),
             md(0), md(1);
        const Vec3& v = s.v_c_sigma;
        const Vec3 rotation(-2.0 * w * v(1), 2.0 * w * v(0), 0.0);
        d.v_c_sigma = rotation + (detail::sigma_sigma_matrix(ms) * s.i_sigma / 4.0 + c * s.i_delta / 8.0) / p.c_arm;
    }

    // Circulating current.
    {
        const Vec3 vm = vm_sigma_dqz(u.m, s.v_c_sigma, s.v_c_delta);
        const Vec3& i = s.i_sigma;
        const Vec3 rotation(-2.0 * w * i(1), 2.0 * w * i(0), 0.0);
        d.i_sigma = (Vec3(0.0, 0.0, u.v_dc / 2.0) - p.r_arm * i - vm) / p.l_arm + rotation;
    }

    // Grid current.
    {
        const Vec2 vm = vm_delta_dq(u.m, s.v_c_sigma, s.v_c_delta);
        const Vec2& i = s.i_delta;
        const Vec2 rotation(-w * i(1), w * i(0));
        d.i_delta = (vm - u.v_g - p.r_eq_ac * i) / p.l_eq_ac + rotation;
    }
    return d;
}

/// Flat start in the rotating frames: only the dc part of the capacitor sum.
inline SstiState ssti_flat_start(const MmcParams& p)
{
    SstiState s;
    s.v_c_sigma(2) = p.v_dc_nominal;
    return s;
}

}  // namespace mmc
