#pragma once

// Validation controller: circulating current suppression (CCSC) in the -2w
// frame plus synchronous-frame PI control of the grid current, and the
// insertion-index synthesis that lets one controller drive either model.
//
// Controller signals are per unit on the ac bases (peak phase voltage and the
// matching peak current), for both the grid and the circulating current.

#include "mmc/frames.hpp"
#include "mmc/params.hpp"
#include "mmc/ssti.hpp"

#include <stdexcept>
#include <utility>

namespace mmc {

class ControlError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// PI integrator states, each holding the time integral of its error (pu*s).
struct CtrlState {
    Vec2 int_i_delta = Vec2::Zero();
    Vec2 int_i_sigma = Vec2::Zero();

    void reset() { *this = CtrlState{}; }
};

struct Refs {
    double p_ref = 0.0;  // pu, delivered to the grid
    double q_ref = 0.0;  // pu
    Vec2 i_sigma_ref = Vec2::Zero();
};

/// Solves p = vd id + vq iq, q = vq id - vd iq for the grid-current reference.
inline Vec2 power_to_current_refs(double p_ref, double q_ref, const Vec2& v_g_dq)
{
    const double v2 = v_g_dq.squaredNorm();
    if (!(std::sqrt(v2) > 0.1)) throw ControlError("grid voltage collapse: |v_g| <= 0.1 pu");
    return {(p_ref * v_g_dq(0) + q_ref * v_g_dq(1)) / v2, (p_ref * v_g_dq(1) - q_ref * v_g_dq(0)) / v2};
}

/// Delivered active and reactive power (pu) from dq grid voltage and current.
inline Vec2 delivered_power(const Vec2& v_g_dq, const Vec2& i_dq)
{
    return {v_g_dq(0) * i_dq(0) + v_g_dq(1) * i_dq(1), v_g_dq(1) * i_dq(0) - v_g_dq(0) * i_dq(1)};
}

// ---------------------------------------------------------------------------
// PI laws. Each has a pure output form (used inside the integrator of the
// closed loop, where the integral is part of the state) and a stepped form
// that advances its integrator by explicit Euler.
// ---------------------------------------------------------------------------

/// vm_delta* = v_g + kp (e + int/tau) + w Leq Jw-decoupling, e = ref - i.
inline Vec2 grid_current_output(const Vec2& i_dq, const Vec2& i_ref, const Vec2& v_g_dq, const Vec2& integral,
                                const MmcParams& p)
{
    const double x = p.omega() * p.l_eq_ac / p.z_base();
    const Vec2 e = i_ref - i_dq;
    return v_g_dq + p.kp_delta * (e + integral / p.tau_i_delta) + Vec2(x * i_dq(1), -x * i_dq(0));
}

inline std::pair<Vec2, CtrlState> grid_current_pi(const Vec2& i_dq, const Vec2& i_ref, const Vec2& v_g_dq,
                                                  CtrlState st, double dt, const MmcParams& p)
{
    if (!(dt > 0.0)) throw ControlError("dt must be positive");
    const Vec2 out = grid_current_output(i_dq, i_ref, v_g_dq, st.int_i_delta, p);
    st.int_i_delta += (i_ref - i_dq) * dt;
    return {out, st};
}

/// vm_sigma* = kp (e + int/tau) - 2w Larm J-decoupling, with the suppression
/// error e = i - ref (a positive modulated voltage opposes the current).
inline Vec2 ccsc_output(const Vec2& i_sigma_dq, const Vec2& ref, const Vec2& integral, const MmcParams& p)
{
    const double x = 2.0 * p.omega() * p.l_arm / p.z_base();
    const Vec2 e = i_sigma_dq - ref;
    return p.kp_sigma * (e + integral / p.tau_i_sigma) - Vec2(x * i_sigma_dq(1), -x * i_sigma_dq(0));
}

inline std::pair<Vec2, CtrlState> ccsc_pi(const Vec2& i_sigma_dq, const Vec2& ref, CtrlState st, double dt,
                                          const MmcParams& p)
{
    if (!(dt > 0.0)) throw ControlError("dt must be positive");
    const Vec2 out = ccsc_output(i_sigma_dq, ref, st.int_i_sigma, p);
    st.int_i_sigma += (i_sigma_dq - ref) * dt;
    return {out, st};
}

/// Direct (uncompensated) modulation from modulated-voltage references in volts.
inline Modulation synthesize_modulation(const Vec2& vm_delta_ref, const Vec2& vm_sigma_ref, const MmcParams& p,
                                        const Vec2& m_delta_z = Vec2::Zero())
{
    if (!(p.v_dc_nominal > 0.0)) throw ControlError("v_dc_nominal must be positive");
    Modulation m;
    m.delta << -2.0 * vm_delta_ref / p.v_dc_nominal, m_delta_z;
    m.sigma << 2.0 * vm_sigma_ref / p.v_dc_nominal, 1.0;
    return m;
}

struct AbcModulation {
    Vec3Abc m_sigma;
    Vec3Abc m_delta;
};

/// Stationary-frame insertion-index sums and differences at time t.
inline AbcModulation modulation_to_abc(const Modulation& m, double t, const MmcParams& p)
{
    const double theta = p.omega() * t;
    const Dqz2W sigma{m.sigma(0), m.sigma(1), m.sigma(2)};
    const DqzW delta{m.delta(0), m.delta(1), m_delta_z_waveform(m.delta.tail<2>(), 3.0 * theta)};
    return {to_abc(sigma, -2.0 * theta), to_abc(delta, theta)};
}

/// Per-unit measurements consumed by the controller.
struct Measurements {
    Vec2 i_delta = Vec2::Zero();
    Vec2 i_sigma = Vec2::Zero();
    Vec2 v_g = Vec2::Zero();
};

struct ControlOutput {
    Modulation m;
    CtrlState rate;  // time derivative of the integrator states
    Vec2 i_delta_ref = Vec2::Zero();
};

/// The complete controller as a continuous-time law, shared by both plants.
class ControlLaw {
public:
    explicit ControlLaw(MmcParams p, Vec2 m_delta_z = Vec2::Zero()) : p_(std::move(p)), m_delta_z_(m_delta_z) {}

    [[nodiscard]] ControlOutput evaluate(const Measurements& y, const CtrlState& st, const Refs& r) const
    {
        ControlOutput out;
        out.i_delta_ref = power_to_current_refs(r.p_ref, r.q_ref, y.v_g);
        const Vec2 vm_delta = grid_current_output(y.i_delta, out.i_delta_ref, y.v_g, st.int_i_delta, p_);
        const Vec2 vm_sigma = ccsc_output(y.i_sigma, r.i_sigma_ref, st.int_i_sigma, p_);
        out.m = synthesize_modulation(vm_delta * p_.v_base_ac, vm_sigma * p_.v_base_ac, p_, m_delta_z_);
        out.rate.int_i_delta = out.i_delta_ref - y.i_delta;
        out.rate.int_i_sigma = y.i_sigma - r.i_sigma_ref;
        return out;
    }

    [[nodiscard]] const MmcParams& params() const { return p_; }

private:
    MmcParams p_;
    Vec2 m_delta_z_;
};

}  // namespace mmc
