#pragma once

// Fixed-step closed-loop simulation of either model under a scripted
// scenario of power-reference steps.

#include "mmc/aam.hpp"
#include "mmc/control.hpp"
#include "mmc/frames.hpp"
#include "mmc/params.hpp"
#include "mmc/ssti.hpp"
#include "mmc/trace.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmc {

class SimulationError : public std::runtime_error {
public:
    SimulationError(const std::string& what, double t) : std::runtime_error(what), time(t) {}
    double time;
};

class ScenarioError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Integrator
// ---------------------------------------------------------------------------

/// Classical fourth-order Runge-Kutta step of dx/dt = f(t, x).
template <class State, class F>
State rk4_step(F&& f, const State& x, double t, double dt)
{
    auto checked = [&](double tt, const State& xx) {
        State d = f(tt, xx);
        if (!d.allFinite()) {
            std::ostringstream msg;
            msg << "trajectory blowup: non-finite derivative at t = " << tt << " s";
            throw SimulationError(msg.str(), tt);
        }
        return d;
    };
    const State k1 = checked(t, x);
    const State k2 = checked(t + dt / 2, State(x + dt / 2 * k1));
    const State k3 = checked(t + dt / 2, State(x + dt / 2 * k2));
    const State k4 = checked(t + dt, State(x + dt * k3));
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

enum class RefField { P, Q };

struct RefEvent {
    double time = 0.0;
    RefField field = RefField::P;
    double value = 0.0;
};

struct Scenario {
    double duration = 0.3;
    std::optional<double> dt;  // falls back to the model default
    std::vector<RefEvent> events;
    double p_ref0 = 1.0;
    double q_ref0 = 0.0;

    void validate() const
    {
        if (!(duration > 0.0)) throw ScenarioError("duration must be positive");
        if (dt && !(*dt > 0.0 && *dt < duration)) throw ScenarioError("dt must satisfy 0 < dt < duration");
        for (std::size_t i = 0; i < events.size(); ++i) {
            if (events[i].time < 0.0 || events[i].time > duration) {
                throw ScenarioError("event time outside [0, duration]");
            }
            if (i > 0 && events[i].time < events[i - 1].time) throw ScenarioError("events must be time-sorted");
        }
    }

    /// Copy that ends at `d`, without the events after it.
    [[nodiscard]] Scenario truncated(double d) const
    {
        Scenario s = *this;
        s.duration = d;
        std::erase_if(s.events, [d](const RefEvent& e) { return e.time > d; });
        return s;
    }

    [[nodiscard]] Refs refs_at(double t) const
    {
        Refs r{p_ref0, q_ref0, Vec2::Zero()};
        for (const auto& e : events) {
            if (e.time > t) break;
            (e.field == RefField::P ? r.p_ref : r.q_ref) = e.value;
        }
        return r;
    }

    /// Last 30% of every inter-event segment.
    [[nodiscard]] std::vector<Window> steady_state_windows(double fraction = 0.3) const
    {
        std::vector<double> edges{0.0};
        for (const auto& e : events) {
            if (e.time > edges.back()) edges.push_back(e.time);
        }
        if (duration > edges.back()) edges.push_back(duration);
        std::vector<Window> w;
        for (std::size_t i = 1; i < edges.size(); ++i) {
            w.push_back({edges[i] - fraction * (edges[i] - edges[i - 1]), edges[i]});
        }
        return w;
    }
};

/// The reference-step test: Q to -0.1 pu at 50 ms, P from 1 to 0.5 pu at 150 ms.
inline Scenario reference_steps()
{
    Scenario sc;
    sc.duration = 0.3;
    sc.p_ref0 = 1.0;
    sc.q_ref0 = 0.0;
    sc.events = {{0.05, RefField::Q, -0.1}, {0.15, RefField::P, 0.5}};
    return sc;
}

/// Key-value scenario text:
///
///   duration_s = 0.3
///   dt_s = 50e-6          # optional
///   p_ref = 1.0
///   q_ref = 0.0
///   event = 0.05 q_ref -0.1
///   event = 0.15 p_ref 0.5
inline Scenario scenario_from_text(std::istream& in)
{
    Scenario sc;
    sc.events.clear();
    bool have_duration = false;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ScenarioError("line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = detail::trim(std::string_view(body).substr(0, eq));
        const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
        auto number = [&](const std::string& text) {
            try {
                return detail::parse_number(text, key);
            } catch (const ParamError& e) {
                throw ScenarioError(e.what());
            }
        };
        if (key == "duration_s") {
            sc.duration = number(value);
            have_duration = true;
        } else if (key == "dt_s") {
            sc.dt = number(value);
        } else if (key == "p_ref") {
            sc.p_ref0 = number(value);
        } else if (key == "q_ref") {
            sc.q_ref0 = number(value);
        } else if (key == "event") {
            std::istringstream ev(value);
            std::string t, field, v, extra;
            if (!(ev >> t >> field >> v) || (ev >> extra)) {
                throw ScenarioError("line " + std::to_string(lineno) + ": event needs '<time> <p_ref|q_ref> <value>'");
            }
            RefEvent e;
            e.time = number(t);
            if (field == "p_ref") e.field = RefField::P;
            else if (field == "q_ref") e.field = RefField::Q;
            else throw ScenarioError("unknown event field " + field);
            e.value = number(v);
            sc.events.push_back(e);
        } else {
            throw ScenarioError("unknown key " + key);
        }
    }
    if (!have_duration) throw ScenarioError("missing key duration_s");
    sc.validate();
    return sc;
}

inline Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file " + path);
    return scenario_from_text(in);
}

// ---------------------------------------------------------------------------
// Closed loops. State layout: 12 plant states in SI followed by the four
// integrator states (grid d, q; circulating d, q).
// ---------------------------------------------------------------------------

using LoopVector = Eigen::Matrix<double, 16, 1>;

/// Physical inputs: dc voltage and grid voltage amplitude (phase a peak,
/// aligned with the +w frame d axis), in volts.
struct Grid {
    double v_dc = 0.0;
    Vec2 v_g = Vec2::Zero();

    static Grid nominal(const MmcParams& p)
    {
        return {p.v_dc_nominal, Vec2(p.u1n_ac_voltage * std::numbers::sqrt2 / std::numbers::sqrt3, 0.0)};
    }
};

inline CtrlState ctrl_from(const LoopVector& x)
{
    CtrlState c;
    c.int_i_delta = x.segment<2>(12);
    c.int_i_sigma = x.segment<2>(14);
    return c;
}

class SstiClosedLoop {
public:
    SstiClosedLoop(MmcParams p, Grid g, Vec2 m_delta_z = Vec2::Zero())
        : p_(p), grid_(g), law_(p, m_delta_z) {}

    [[nodiscard]] Measurements measure(const SstiState& s) const
    {
        const double ib = p_.i_base();
        return {s.i_delta / ib, s.i_sigma.head<2>() / ib, grid_.v_g / p_.v_base_ac};
    }

    [[nodiscard]] ControlOutput control(const LoopVector& x, const Refs& r) const
    {
        return law_.evaluate(measure(SstiState::from_flat(x.head<12>())), ctrl_from(x), r);
    }

    [[nodiscard]] LoopVector operator()(const LoopVector& x, const Refs& r) const
    {
        const SstiState s = SstiState::from_flat(x.head<12>());
        const ControlOutput c = control(x, r);
        const SstiState d = ssti_derivatives(s, {c.m, grid_.v_g, grid_.v_dc}, p_);
        LoopVector out;
        out << d.flat(), c.rate.int_i_delta, c.rate.int_i_sigma;
        return out;
    }

    [[nodiscard]] const MmcParams& params() const { return p_; }
    [[nodiscard]] const Grid& grid() const { return grid_; }

private:
    MmcParams p_;
    Grid grid_;
    ControlLaw law_;
};

inline AamState aam_from_loop(const LoopVector& x)
{
    return {{x(0), x(1), x(2)}, {x(3), x(4), x(5)}, {x(6), x(7), x(8)}, {x(9), x(10), x(11)}};
}

class AamClosedLoop {
public:
    AamClosedLoop(MmcParams p, Grid g, Vec2 m_delta_z = Vec2::Zero())
        : p_(p), grid_(g), law_(p, m_delta_z) {}

    /// Grid voltages: the dq vector rotated into abc at angle wt.
    [[nodiscard]] Vec3Abc grid_voltage(double t) const
    {
        return to_abc(DqzW{grid_.v_g(0), grid_.v_g(1), 0.0}, p_.omega() * t);
    }

    [[nodiscard]] Measurements measure(const AamState& s, double t) const
    {
        const double th = p_.omega() * t;
        const double ib = p_.i_base();
        const DqzW id = to_dqz<1>(s.i_delta, th);
        const Dqz2W is = to_dqz<-2>(s.i_sigma, -2.0 * th);
        return {Vec2(id.d, id.q) / ib, Vec2(is.d, is.q) / ib, grid_.v_g / p_.v_base_ac};
    }

    struct Evaluation {
        ControlOutput control;
        AbcModulation m;
    };

    [[nodiscard]] Evaluation control(double t, const LoopVector& x, const Refs& r) const
    {
        const ControlOutput c = law_.evaluate(measure(aam_from_loop(x), t), ctrl_from(x), r);
        return {c, modulation_to_abc(c.m, t, p_)};
    }

    [[nodiscard]] LoopVector operator()(double t, const LoopVector& x, const Refs& r) const
    {
        const auto ev = control(t, x, r);
        const AamState d = aam_derivatives(aam_from_loop(x), {ev.m.m_sigma, ev.m.m_delta, grid_voltage(t), grid_.v_dc}, p_);
        LoopVector out;
        out << d.i_delta.a, d.i_delta.b, d.i_delta.c, d.i_sigma.a, d.i_sigma.b, d.i_sigma.c, d.v_c_sigma.a,
            d.v_c_sigma.b, d.v_c_sigma.c, d.v_c_delta.a, d.v_c_delta.b, d.v_c_delta.c, ev.control.rate.int_i_delta,
            ev.control.rate.int_i_sigma;
        return out;
    }

    [[nodiscard]] const MmcParams& params() const { return p_; }

private:
    MmcParams p_;
    Grid grid_;
    ControlLaw law_;
};

inline LoopVector ssti_loop_flat_start(const MmcParams& p)
{
    LoopVector x = LoopVector::Zero();
    x.head<12>() = ssti_flat_start(p).flat();
    return x;
}

inline LoopVector aam_loop_flat_start(const MmcParams& p)
{
    LoopVector x = LoopVector::Zero();
    x.segment<3>(6).setConstant(p.v_dc_nominal);
    return x;
}

/// Maps an SSTI loop state to the arm-averaged loop state it represents at time t.
inline LoopVector ssti_to_aam_loop(const LoopVector& x, double t, const MmcParams& p)
{
    const SstiState s = SstiState::from_flat(x.head<12>());
    const double th = p.omega() * t;
    const Vec3Abc id = to_abc(DqzW{s.i_delta(0), s.i_delta(1), 0.0}, th);
    const Vec3Abc is = to_abc(Dqz2W{s.i_sigma(0), s.i_sigma(1), s.i_sigma(2)}, -2.0 * th);
    const Vec3Abc vs = to_abc(Dqz2W{s.v_c_sigma(0), s.v_c_sigma(1), s.v_c_sigma(2)}, -2.0 * th);
    const Vec3Abc vd = to_abc(
        DqzW{s.v_c_delta(0), s.v_c_delta(1), reconstruct_vcdz(s.v_c_delta.tail<2>(), 3.0 * th)}, th);
    LoopVector out;
    out << id.a, id.b, id.c, is.a, is.b, is.c, vs.a, vs.b, vs.c, vd.a, vd.b, vd.c, x.tail<4>();
    return out;
}

// ---------------------------------------------------------------------------
// Scenario runner
// ---------------------------------------------------------------------------

enum class Model { Aam, Ssti };

inline const char* model_name(Model m) { return m == Model::Aam ? "aam" : "ssti"; }

inline double default_dt(Model m) { return m == Model::Aam ? 10e-6 : 50e-6; }

struct RunOptions {
    std::optional<double> dt;                 // overrides the scenario and model default
    std::optional<LoopVector> initial_state;  // model-native loop state; flat start otherwise
    std::optional<Grid> grid;                 // nominal when unset
    Vec2 m_delta_z = Vec2::Zero();            // third-harmonic injection
};

namespace detail {

inline TraceLog make_trace(Model model, std::size_t samples, double dt)
{
    TraceLog tr(dt);
    tr.reserve(samples);
    auto add = [&](const std::string& n, const std::string& u, std::optional<Quantity> k) { tr.add_channel(n, u, k); };
    if (model == Model::Ssti) {
        for (const char* n : {"v_c_delta_d", "v_c_delta_q", "v_c_delta_Zd", "v_c_delta_Zq", "v_c_sigma_d",
                              "v_c_sigma_q", "v_c_sigma_z"})
            add(n, "V", Quantity::DcVoltage);
        for (const char* n : {"i_sigma_d", "i_sigma_q", "i_sigma_z", "i_delta_d", "i_delta_q"})
            add(n, "A", Quantity::Current);
        add("v_c_delta_z", "V", Quantity::DcVoltage);
        for (const char* n : {"m_sigma_d", "m_sigma_q", "m_sigma_z", "m_delta_d", "m_delta_q", "m_delta_Zd",
                              "m_delta_Zq"})
            add(n, "-", std::nullopt);
    } else {
        for (const char* n : {"i_delta_a", "i_delta_b", "i_delta_c", "i_sigma_a", "i_sigma_b", "i_sigma_c"})
            add(n, "A", Quantity::Current);
        for (const char* n : {"v_c_sigma_a", "v_c_sigma_b", "v_c_sigma_c", "v_c_delta_a", "v_c_delta_b",
                              "v_c_delta_c"})
            add(n, "V", Quantity::DcVoltage);
        for (const char* n : {"m_sigma_a", "m_sigma_b", "m_sigma_c", "m_delta_a", "m_delta_b", "m_delta_c"})
            add(n, "-", std::nullopt);
    }
    for (const char* n : {"int_i_delta_d", "int_i_delta_q", "int_i_sigma_d", "int_i_sigma_q"})
        add(n, "pu*s", std::nullopt);
    for (const char* n : {"p_ref", "q_ref", "p", "q"}) add(n, "pu", std::nullopt);
    return tr;
}

}  // namespace detail

/// Runs the closed loop over the scenario and logs every sample.
inline TraceLog run_scenario(Model model, const Scenario& sc, const MmcParams& p, const RunOptions& opt = {})
{
    validate(p);
    sc.validate();
    const double dt = opt.dt.value_or(sc.dt.value_or(default_dt(model)));
    if (!(dt > 0.0) || dt >= sc.duration) throw ScenarioError("dt must satisfy 0 < dt < duration");
    const auto steps = static_cast<std::size_t>(std::floor(sc.duration / dt + 1e-9));

    // Reference changes are applied on the step grid.
    std::vector<std::size_t> event_step;
    for (const auto& e : sc.events) event_step.push_back(static_cast<std::size_t>(std::llround(e.time / dt)));
    auto refs_for_step = [&](std::size_t n) {
        Refs r{sc.p_ref0, sc.q_ref0, Vec2::Zero()};
        for (std::size_t i = 0; i < sc.events.size(); ++i) {
            if (event_step[i] <= n) (sc.events[i].field == RefField::P ? r.p_ref : r.q_ref) = sc.events[i].value;
        }
        return r;
    };

    const Grid grid = opt.grid.value_or(Grid::nominal(p));
    const Vec2 vg_pu = grid.v_g / p.v_base_ac;
    TraceLog tr = detail::make_trace(model, steps + 1, dt);
    std::vector<double> row;

    if (model == Model::Ssti) {
        const SstiClosedLoop loop(p, grid, opt.m_delta_z);
        LoopVector x = opt.initial_state.value_or(ssti_loop_flat_start(p));
        for (std::size_t n = 0;; ++n) {
            const double t = static_cast<double>(n) * dt;
            const Refs r = refs_for_step(n);
            const ControlOutput c = loop.control(x, r);
            const SstiState s = SstiState::from_flat(x.head<12>());
            const Vec2 pq = delivered_power(vg_pu, s.i_delta / p.i_base());
            row.assign(x.data(), x.data() + 12);
            row.push_back(reconstruct_vcdz(s.v_c_delta.tail<2>(), 3.0 * p.omega() * t));
            for (int i = 0; i < 3; ++i) row.push_back(c.m.sigma(i));
            for (int i = 0; i < 4; ++i) row.push_back(c.m.delta(i));
            for (int i = 12; i < 16; ++i) row.push_back(x(i));
            row.insert(row.end(), {r.p_ref, r.q_ref, pq(0), pq(1)});
            tr.append(t, row);
            {
                const auto m = modulation_to_abc(c.m, t, p);
                if (!indices_in_range(arm_indices(m.m_sigma, m.m_delta))) tr.flag_range_violation(t);
            }
            if (n == steps) break;
            x = rk4_step([&](double, const LoopVector& xx) { return loop(xx, r); }, x, t, dt);
        }
    } else {
        const AamClosedLoop loop(p, grid, opt.m_delta_z);
        LoopVector x = opt.initial_state.value_or(aam_loop_flat_start(p));
        for (std::size_t n = 0;; ++n) {
            const double t = static_cast<double>(n) * dt;
            const Refs r = refs_for_step(n);
            const auto ev = loop.control(t, x, r);
            const Measurements y = loop.measure(aam_from_loop(x), t);
            const Vec2 pq = delivered_power(vg_pu, y.i_delta);
            row.assign(x.data(), x.data() + 12);
            row.insert(row.end(), {ev.m.m_sigma.a, ev.m.m_sigma.b, ev.m.m_sigma.c, ev.m.m_delta.a, ev.m.m_delta.b,
                                   ev.m.m_delta.c});
            for (int i = 12; i < 16; ++i) row.push_back(x(i));
            row.insert(row.end(), {r.p_ref, r.q_ref, pq(0), pq(1)});
            tr.append(t, row);
            if (!indices_in_range(arm_indices(ev.m.m_sigma, ev.m.m_delta))) tr.flag_range_violation(t);
            if (n == steps) break;
            x = rk4_step([&](double tt, const LoopVector& xx) { return loop(tt, xx, r); }, x, t, dt);
        }
    }
    return tr;
}

}  // namespace mmc
