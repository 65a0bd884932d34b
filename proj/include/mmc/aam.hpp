#pragma once

// Stationary-frame arm-averaged model in sum/difference variables. This is
// the full-fidelity reference: every harmonic, including the 6w content that
// the time-invariant model drops, is retained.

#include "mmc/frames.hpp"
#include "mmc/params.hpp"

#include <array>

namespace mmc {

struct AamState {
    Vec3Abc i_delta;    // A, grid currents (iU - iL)
    Vec3Abc i_sigma;    // A, circulating currents (iU + iL)/2
    Vec3Abc v_c_sigma;  // V, (vCU + vCL)/2
    Vec3Abc v_c_delta;  // V, (vCU - vCL)/2

    static constexpr int size = 12;

    bool operator==(const AamState&) const = default;
};

inline AamState operator+(const AamState& x, const AamState& y)
{
    return {x.i_delta + y.i_delta, x.i_sigma + y.i_sigma, x.v_c_sigma + y.v_c_sigma,
            x.v_c_delta + y.v_c_delta};
}

inline AamState operator*(double s, const AamState& x)
{
    return {s * x.i_delta, s * x.i_sigma, s * x.v_c_sigma, s * x.v_c_delta};
}

struct AamInputs {
    Vec3Abc m_sigma;  // mU + mL
    Vec3Abc m_delta;  // mU - mL
    Vec3Abc v_g;      // V
    double v_dc = 0.0;
};

struct ModulatedVoltages {
    Vec3Abc vm_delta;  // drives the grid current
    Vec3Abc vm_sigma;  // drives the circulating current
};

inline ModulatedVoltages modulated_voltages(const Vec3Abc& m_sigma, const Vec3Abc& m_delta,
                                            const Vec3Abc& v_c_sigma, const Vec3Abc& v_c_delta)
{
    return {-0.5 * (ewise(m_delta, v_c_sigma) + ewise(m_sigma, v_c_delta)),
            0.5 * (ewise(m_sigma, v_c_sigma) + ewise(m_delta, v_c_delta))};
}

/// Time derivative of the arm-averaged state.
///
/// The grid is a three-wire connection, so any common-mode part of
/// (vm_delta - v_g - Req i_delta) appears across the floating neutral and does
/// not drive current. Removing it keeps sum(i_delta) = 0 and leaves 11
/// independent states; when the common-mode part is already zero this is
/// exactly Leq di/dt = vm_delta - v_g - Req i_delta.
inline AamState aam_derivatives(const AamState& s, const AamInputs& u, const MmcParams& p)
{
    const auto vm = modulated_voltages(u.m_sigma, u.m_delta, s.v_c_sigma, s.v_c_delta);

    Vec3Abc drive_delta = vm.vm_delta - u.v_g - p.r_eq_ac * s.i_delta;
    drive_delta -= Vec3Abc::uniform(drive_delta.mean());

    const Vec3Abc drive_sigma = Vec3Abc::uniform(u.v_dc / 2.0) - vm.vm_sigma - p.r_arm * s.i_sigma;

    const double two_c = 2.0 * p.c_arm;
    AamState d;
    d.i_delta = drive_delta / p.l_eq_ac;
    d.i_sigma = drive_sigma / p.l_arm;
    d.v_c_sigma = (0.5 * ewise(u.m_delta, s.i_delta) + ewise(u.m_sigma, s.i_sigma)) / two_c;
    d.v_c_delta = (0.5 * ewise(u.m_sigma, s.i_delta) + ewise(u.m_delta, s.i_sigma)) / two_c;
    return d;
}

struct ArmQuantities {
    Vec3Abc i_upper, i_lower;
    Vec3Abc v_c_upper, v_c_lower;
};

inline ArmQuantities arm_quantities(const AamState& s)
{
    return {s.i_sigma + 0.5 * s.i_delta, s.i_sigma - 0.5 * s.i_delta,
            s.v_c_sigma + s.v_c_delta, s.v_c_sigma - s.v_c_delta};
}

/// Inverse of arm_quantities.
inline AamState from_arm_quantities(const ArmQuantities& arm)
{
    AamState s;
    s.i_delta = arm.i_upper - arm.i_lower;
    s.i_sigma = 0.5 * (arm.i_upper + arm.i_lower);
    s.v_c_sigma = 0.5 * (arm.v_c_upper + arm.v_c_lower);
    s.v_c_delta = 0.5 * (arm.v_c_upper - arm.v_c_lower);
    return s;
}

struct ArmIndices {
    Vec3Abc upper;  // (m_sigma + m_delta)/2
    Vec3Abc lower;  // (m_sigma - m_delta)/2
};

inline ArmIndices arm_indices(const Vec3Abc& m_sigma, const Vec3Abc& m_delta)
{
    return {0.5 * (m_sigma + m_delta), 0.5 * (m_sigma - m_delta)};
}

/// True when every per-arm insertion index lies in [0, 1].
inline bool indices_in_range(const ArmIndices& m)
{
    for (int j = 0; j < 3; ++j) {
        if (m.upper[j] < 0.0 || m.upper[j] > 1.0 || m.lower[j] < 0.0 || m.lower[j] > 1.0) {
            return false;
        }
    }
    return true;
}

/// Flat start: no current, every arm capacitor charged to the dc voltage.
inline AamState aam_flat_start(const MmcParams& p)
{
    AamState s;
    s.v_c_sigma = Vec3Abc::uniform(p.v_dc_nominal);
    return s;
}

inline std::array<double, AamState::size> to_array(const AamState& s)
{
    return {s.i_delta.a,   s.i_delta.b,   s.i_delta.c,   s.i_sigma.a,   s.i_sigma.b,   s.i_sigma.c,
            s.v_c_sigma.a, s.v_c_sigma.b, s.v_c_sigma.c, s.v_c_delta.a, s.v_c_delta.b, s.v_c_delta.c};
}

inline AamState aam_from_array(const std::array<double, AamState::size>& x)
{
    return {{x[0], x[1], x[2]}, {x[3], x[4], x[5]}, {x[6], x[7], x[8]}, {x[9], x[10], x[11]}};
}

}  // namespace mmc
