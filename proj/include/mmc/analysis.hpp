#pragma once

// Equilibrium, linearisation and eigenvalue analysis of the time-invariant
// model, and the cross-model harness that projects arm-averaged traces into
// the rotating frames and compares them channel by channel.

#include "mmc/aam.hpp"
#include "mmc/control.hpp"
#include "mmc/frames.hpp"
#include "mmc/params.hpp"
#include "mmc/sim.hpp"
#include "mmc/ssti.hpp"
#include "mmc/trace.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmc {

class AnalysisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EquilibriumError : public AnalysisError {
public:
    enum class Kind { NonConvergence, SingularJacobian };
    EquilibriumError(Kind k, double best, const std::string& what) : AnalysisError(what), kind(k), best_residual(best) {}
    Kind kind;
    double best_residual;
};

// ---------------------------------------------------------------------------
// Linearisation and spectrum
// ---------------------------------------------------------------------------

using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

struct LinearModel {
    Eigen::MatrixXd a_matrix;
    Eigen::MatrixXd b_matrix;
    std::vector<std::string> state_labels;
    std::vector<std::string> input_labels;
    Eigen::VectorXd x0;
    Eigen::VectorXd u0;
};

/// Central finite differences with step max(1e-6, 1e-6 |x_i|) per coordinate.
inline LinearModel linearize(const VectorField& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& u0,
                             std::vector<std::string> state_labels = {}, std::vector<std::string> input_labels = {},
                             double rel_step = 1e-6)
{
    const auto n = x0.size();
    const auto m = u0.size();
    const auto n_out = f(x0, u0).size();
    LinearModel lm;
    lm.a_matrix.resize(n_out, n);
    lm.b_matrix.resize(n_out, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = std::max(rel_step, rel_step * std::abs(x0(i)));
        Eigen::VectorXd xp = x0, xm = x0;
        xp(i) += h;
        xm(i) -= h;
        lm.a_matrix.col(i) = (f(xp, u0) - f(xm, u0)) / (xp(i) - xm(i));
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        const double h = std::max(rel_step, rel_step * std::abs(u0(i)));
        Eigen::VectorXd up = u0, um = u0;
        up(i) += h;
        um(i) -= h;
        lm.b_matrix.col(i) = (f(x0, up) - f(x0, um)) / (up(i) - um(i));
    }
    if (!lm.a_matrix.allFinite() || !lm.b_matrix.allFinite()) throw AnalysisError("linearisation produced non-finite entries");
    lm.state_labels = std::move(state_labels);
    lm.input_labels = std::move(input_labels);
    lm.x0 = x0;
    lm.u0 = u0;
    return lm;
}

/// Full complex spectrum sorted by real part, largest first.
inline std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& a)
{
    if (a.rows() != a.cols()) throw AnalysisError("eigenvalues need a square matrix");
    if (!a.allFinite()) throw AnalysisError("matrix has non-finite entries");
    Eigen::EigenSolver<Eigen::MatrixXd> solver(a, false);
    if (solver.info() != Eigen::Success) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
        const auto& sv = svd.singularValues();
        std::ostringstream msg;
        msg << "eigenvalue iteration did not converge (2-norm condition "
            << sv(0) / sv(sv.size() - 1) << ")";
        throw AnalysisError(msg.str());
    }
    std::vector<std::complex<double>> ev(solver.eigenvalues().begin(), solver.eigenvalues().end());
    std::stable_sort(ev.begin(), ev.end(), [](const auto& x, const auto& y) {
        if (x.real() != y.real()) return x.real() > y.real();
        return x.imag() > y.imag();
    });
    return ev;
}

// ---------------------------------------------------------------------------
// Closed-loop field in per-unit coordinates
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& loop_state_labels()
{
    static const std::vector<std::string> labels = {
        "v_c_delta_d", "v_c_delta_q", "v_c_delta_Zd", "v_c_delta_Zq", "v_c_sigma_d", "v_c_sigma_q",
        "v_c_sigma_z", "i_sigma_d",   "i_sigma_q",    "i_sigma_z",    "i_delta_d",   "i_delta_q",
        "int_i_delta_d", "int_i_delta_q", "int_i_sigma_d", "int_i_sigma_q"};
    return labels;
}

inline const std::vector<std::string>& loop_input_labels()
{
    static const std::vector<std::string> labels = {"p_ref", "q_ref", "v_dc", "v_g_d", "v_g_q"};
    return labels;
}

/// State scaling: capacitor voltages on the dc base, currents on the ac
/// current base, integrators already in pu*s.
inline LoopVector loop_scale(const MmcParams& p)
{
    LoopVector d;
    d.head<7>().setConstant(p.v_base_dc);
    d.segment<5>(7).setConstant(p.i_base());
    d.tail<4>().setConstant(1.0);
    return d;
}

/// Closed-loop SSTI field f(x_pu, u_pu) with u = (p_ref, q_ref, v_dc, v_gd, v_gq).
inline VectorField closed_loop_field(const MmcParams& p, const Vec2& m_delta_z = Vec2::Zero())
{
    const LoopVector scale = loop_scale(p);
    return [p, scale, m_delta_z](const Eigen::VectorXd& x_pu, const Eigen::VectorXd& u) -> Eigen::VectorXd {
        const Grid g{u(2) * p.v_base_dc, Vec2(u(3), u(4)) * p.v_base_ac};
        const SstiClosedLoop loop(p, g, m_delta_z);
        const LoopVector x = x_pu.cwiseProduct(scale);
        const Refs r{u(0), u(1), Vec2::Zero()};
        return loop(x, r).cwiseQuotient(scale);
    };
}

inline Eigen::VectorXd loop_inputs(const MmcParams& p, const Refs& r, const Grid& g)
{
    Eigen::VectorXd u(5);
    u << r.p_ref, r.q_ref, g.v_dc / p.v_base_dc, g.v_g(0) / p.v_base_ac, g.v_g(1) / p.v_base_ac;
    return u;
}

// ---------------------------------------------------------------------------
// Equilibrium
// ---------------------------------------------------------------------------

struct Equilibrium {
    SstiState x_star;
    Modulation u_star;
    CtrlState ctrl_star;
    Refs refs;
    Grid grid;
    double residual_norm = 0.0;  // pu/s, infinity norm
    int iterations = 0;

    [[nodiscard]] LoopVector loop_state() const
    {
        LoopVector x;
        x << x_star.flat(), ctrl_star.int_i_delta, ctrl_star.int_i_sigma;
        return x;
    }
};

struct NewtonOptions {
    double tolerance = 1e-10;  // pu/s
    int max_iterations = 50;
};

/// Newton iteration on the closed loop (plant plus PI integrators) with a
/// finite-difference Jacobian and backtracking on the residual norm.
inline Equilibrium find_equilibrium(const MmcParams& p, const Refs& refs, const NewtonOptions& opt = {},
                                    std::optional<Grid> grid_opt = std::nullopt)
{
    const Grid grid = grid_opt.value_or(Grid::nominal(p));
    const VectorField f = closed_loop_field(p);
    const Eigen::VectorXd u = loop_inputs(p, refs, grid);

    // Start from the lossless power balance: grid current at its reference,
    // capacitors at the dc voltage, dc current carrying the active power.
    Eigen::VectorXd x = Eigen::VectorXd::Zero(16);
    const Vec2 vg_pu = grid.v_g / p.v_base_ac;
    const Vec2 i_ref = power_to_current_refs(refs.p_ref, refs.q_ref, vg_pu);
    x(6) = grid.v_dc / p.v_base_dc;
    x(9) = refs.p_ref * p.s_base / (3.0 * grid.v_dc) / p.i_base();
    x(10) = i_ref(0);
    x(11) = i_ref(1);

    auto residual = [](const Eigen::VectorXd& r) { return r.lpNorm<Eigen::Infinity>(); };
    Eigen::VectorXd fx = f(x, u);
    double res = residual(fx);
    double best = res;
    int it = 0;
    while (!(res < opt.tolerance)) {
        if (it == opt.max_iterations || !std::isfinite(res)) {
            std::ostringstream msg;
            msg << "Newton did not converge after " << it << " iterations (best residual " << best << " pu/s)";
            throw EquilibriumError(EquilibriumError::Kind::NonConvergence, best, msg.str());
        }
        ++it;
        const Eigen::MatrixXd jac = linearize(f, x, u).a_matrix;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        if (!lu.isInvertible()) {
            throw EquilibriumError(EquilibriumError::Kind::SingularJacobian, best,
                                   "singular Jacobian at Newton iterate " + std::to_string(it));
        }
        const Eigen::VectorXd step = lu.solve(-fx);
        double lambda = 1.0;
        Eigen::VectorXd trial = x + step;
        Eigen::VectorXd ft = f(trial, u);
        while (!(residual(ft) < res) && lambda > 1e-4) {
            lambda /= 2.0;
            trial = x + lambda * step;
            ft = f(trial, u);
        }
        if (!(residual(ft) < res) && res < 1e3 * opt.tolerance) {
            // At round-off level the full step is taken even if the norm stalls.
            trial = x + step;
            ft = f(trial, u);
        }
        x = trial;
        fx = ft;
        res = residual(fx);
        best = std::min(best, res);
    }

    const LoopVector xs = LoopVector(x).cwiseProduct(loop_scale(p));
    Equilibrium eq;
    eq.x_star = SstiState::from_flat(xs.head<12>());
    eq.ctrl_star = ctrl_from(xs);
    eq.refs = refs;
    eq.grid = grid;
    eq.u_star = SstiClosedLoop(p, grid).control(xs, refs).m;
    eq.residual_norm = res;
    eq.iterations = it;
    return eq;
}

/// Loop state of either model sitting on the equilibrium at t = 0.
inline LoopVector warm_start_state(Model model, const Equilibrium& eq, const MmcParams& p)
{
    return model == Model::Ssti ? eq.loop_state() : ssti_to_aam_loop(eq.loop_state(), 0.0, p);
}

/// Worst per-arm insertion index over one fundamental period at the equilibrium.
inline std::pair<double, double> insertion_index_extremes(const Modulation& m, const MmcParams& p, int samples = 720)
{
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    const double period = 1.0 / p.f_nominal;
    for (int k = 0; k < samples; ++k) {
        const auto abc = modulation_to_abc(m, period * k / samples, p);
        const auto arm = arm_indices(abc.m_sigma, abc.m_delta);
        for (int j = 0; j < 3; ++j) {
            lo = std::min({lo, arm.upper[j], arm.lower[j]});
            hi = std::max({hi, arm.upper[j], arm.lower[j]});
        }
    }
    return {lo, hi};
}

/// Closed-loop linear model at an equilibrium, in per-unit coordinates.
inline LinearModel linearize_closed_loop(const Equilibrium& eq, const MmcParams& p, double rel_step = 1e-6)
{
    const Eigen::VectorXd x0 = eq.loop_state().cwiseQuotient(loop_scale(p));
    return linearize(closed_loop_field(p), x0, loop_inputs(p, eq.refs, eq.grid), loop_state_labels(),
                     loop_input_labels(), rel_step);
}

/// Open-loop plant model: 12 states, inputs are the 7 modulation indices
/// followed by v_dc, v_gd, v_gq (per unit).
inline LinearModel linearize_plant(const SstiState& x0, const SstiInputs& u0, const MmcParams& p)
{
    const LoopVector scale = loop_scale(p);
    const SstiVector xs = scale.head<12>();
    VectorField f = [p, xs](const Eigen::VectorXd& x_pu, const Eigen::VectorXd& u) -> Eigen::VectorXd {
        SstiInputs in;
        in.m.sigma = u.segment<3>(0);
        in.m.delta = u.segment<4>(3);
        in.v_dc = u(7) * p.v_base_dc;
        in.v_g = u.segment<2>(8) * p.v_base_ac;
        const SstiVector x = SstiVector(x_pu).cwiseProduct(xs);
        return ssti_derivatives(SstiState::from_flat(x), in, p).flat().cwiseQuotient(xs);
    };
    Eigen::VectorXd u(10);
    u << u0.m.sigma, u0.m.delta, u0.v_dc / p.v_base_dc, u0.v_g / p.v_base_ac;
    std::vector<std::string> states(loop_state_labels().begin(), loop_state_labels().begin() + 12);
    return linearize(f, x0.flat().cwiseQuotient(xs), u, states,
                     {"m_sigma_d", "m_sigma_q", "m_sigma_z", "m_delta_d", "m_delta_q", "m_delta_Zd", "m_delta_Zq",
                      "v_dc", "v_g_d", "v_g_q"});
}

// ---------------------------------------------------------------------------
// Cross-model harness
// ---------------------------------------------------------------------------

/// Projects an arm-averaged trace into the rotating frames. Channel names
/// match the time-invariant model's trace; v_c_delta_z stays in the
/// stationary frame, as does the reconstructed channel of the other model.
inline TraceLog project_aam_trace(const TraceLog& tr, const MmcParams& p)
{
    auto abc = [&](const std::string& stem) {
        return std::array<const std::vector<double>*, 3>{&tr.values(stem + "_a"), &tr.values(stem + "_b"),
                                                        &tr.values(stem + "_c")};
    };
    const auto id = abc("i_delta");
    const auto is = abc("i_sigma");
    const auto vs = abc("v_c_sigma");
    const auto vd = abc("v_c_delta");
    std::vector<const std::vector<double>*> passthrough;
    std::vector<std::string> passthrough_names;
    for (const char* n : {"p_ref", "q_ref", "p", "q"}) {
        if (tr.has_channel(n)) {
            passthrough.push_back(&tr.values(n));
            passthrough_names.emplace_back(n);
        }
    }

    // Projected channels inherit unit and base from their phase-a source.
    TraceLog out(tr.dt());
    auto add_like = [&](const char* name, const std::string& source) {
        const Channel& c = tr.channel(source);
        out.add_channel(name, c.unit, c.kind);
    };
    for (const char* n : {"v_c_delta_d", "v_c_delta_q"}) add_like(n, "v_c_delta_a");
    for (const char* n : {"v_c_sigma_d", "v_c_sigma_q", "v_c_sigma_z"}) add_like(n, "v_c_sigma_a");
    for (const char* n : {"i_sigma_d", "i_sigma_q", "i_sigma_z"}) add_like(n, "i_sigma_a");
    for (const char* n : {"i_delta_d", "i_delta_q"}) add_like(n, "i_delta_a");
    add_like("v_c_delta_z", "v_c_delta_a");
    for (const auto& n : passthrough_names) out.add_channel(n, "pu");

    std::vector<double> row;
    for (std::size_t n = 0; n < tr.size(); ++n) {
        const double th = p.omega() * tr.time()[n];
        auto at = [n](const std::array<const std::vector<double>*, 3>& v) {
            return Vec3Abc{(*v[0])[n], (*v[1])[n], (*v[2])[n]};
        };
        const DqzW d_i = to_dqz<1>(at(id), th);
        const DqzW d_v = to_dqz<1>(at(vd), th);
        const Dqz2W s_i = to_dqz<-2>(at(is), -2.0 * th);
        const Dqz2W s_v = to_dqz<-2>(at(vs), -2.0 * th);
        row = {d_v.d, d_v.q, s_v.d, s_v.q, s_v.z, s_i.d, s_i.q, s_i.z, d_i.d, d_i.q, d_v.z};
        for (const auto* v : passthrough) row.push_back((*v)[n]);
        out.append(tr.time()[n], row);
    }
    return out;
}

struct ChannelError {
    std::string channel;
    double rms = 0.0;       // over the full window
    double max_abs = 0.0;   // over the full window
    double ss_bias = 0.0;   // signed mean of (b - a) in the worst steady-state window
};

struct CompareOptions {
    std::vector<Window> steady_state;  // empty: whole record
    /// When positive, each steady-state window is shortened to a whole number
    /// of these periods before averaging, so periodic ripple does not bias it.
    double bias_period = 0.0;
    std::vector<Window> exclude;  // samples inside these windows are left out of rms/max
};

struct CompareReport {
    std::vector<ChannelError> channels;

    [[nodiscard]] const ChannelError& at(std::string_view name) const
    {
        for (const auto& c : channels)
            if (c.channel == name) return c;
        throw AnalysisError("no comparison for channel " + std::string(name));
    }
};

namespace detail {

/// Brings two traces to a common uniform time base by decimating the finer one.
inline std::pair<TraceLog, TraceLog> common_time_base(const TraceLog& a, const TraceLog& b)
{
    if (a.size() < 2 || b.size() < 2) throw AnalysisError("traces need at least two samples");
    const double da = a.time()[1] - a.time()[0];
    const double db = b.time()[1] - b.time()[0];
    auto ratio = [](double fine, double coarse) -> std::size_t {
        const double r = coarse / fine;
        const double k = std::round(r);
        if (k < 1.0 || std::abs(r - k) > 1e-6 * k) return 0;
        return static_cast<std::size_t>(k);
    };
    TraceLog aa = a, bb = b;
    if (da < db) {
        const auto k = ratio(da, db);
        if (k == 0) throw AnalysisError("incompatible time bases: steps are not integer multiples");
        aa = a.decimate(k);
    } else if (db < da) {
        const auto k = ratio(db, da);
        if (k == 0) throw AnalysisError("incompatible time bases: steps are not integer multiples");
        bb = b.decimate(k);
    }
    const std::size_t n = std::min(aa.size(), bb.size());
    const double step = aa.time()[1] - aa.time()[0];
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(aa.time()[i] - bb.time()[i]) > 1e-6 * step) {
            throw AnalysisError("incompatible time bases: sample times differ");
        }
    }
    return {aa, bb};
}

}  // namespace detail

inline CompareReport compare_traces(const TraceLog& a, const TraceLog& b, const std::vector<std::string>& channels,
                                    const CompareOptions& opt = {})
{
    const auto [aa, bb] = detail::common_time_base(a, b);
    const std::size_t n = std::min(aa.size(), bb.size());
    const auto& t = aa.time();
    const double step = n > 1 ? t[1] - t[0] : 0.0;

    auto excluded = [&](double tt) {
        return std::any_of(opt.exclude.begin(), opt.exclude.end(), [tt](const Window& w) { return w.contains(tt); });
    };

    std::vector<Window> windows = opt.steady_state;
    if (windows.empty()) windows.push_back({t.front(), t[n - 1]});

    CompareReport report;
    for (const auto& name : channels) {
        const auto& va = aa.values(name);
        const auto& vb = bb.values(name);
        ChannelError ce{name};
        double sq = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (excluded(t[i])) continue;
            const double e = vb[i] - va[i];
            sq += e * e;
            ce.max_abs = std::max(ce.max_abs, std::abs(e));
            ++count;
        }
        ce.rms = count ? std::sqrt(sq / static_cast<double>(count)) : 0.0;

        bool first = true;
        for (const auto& w : windows) {
            double begin = w.begin;
            if (opt.bias_period > 0.0 && w.end - w.begin >= opt.bias_period) {
                const double periods = std::floor((w.end - w.begin) / opt.bias_period + 1e-9);
                begin = w.end - periods * opt.bias_period;
            }
            double sum = 0.0;
            std::size_t k = 0;
            // Half-open [begin, end) so a whole number of periods is sampled.
            for (std::size_t i = 0; i < n; ++i) {
                if (t[i] >= begin - 0.5 * step && t[i] < w.end - 0.5 * step) {
                    sum += vb[i] - va[i];
                    ++k;
                }
            }
            if (k == 0) continue;
            const double bias = sum / static_cast<double>(k);
            if (first || std::abs(bias) > std::abs(ce.ss_bias)) ce.ss_bias = bias;
            first = false;
        }
        report.channels.push_back(ce);
    }
    return report;
}

struct WindowStats {
    double mean = 0.0;
    double peak_to_peak = 0.0;
    std::size_t samples = 0;
};

inline WindowStats window_stats(const TraceLog& tr, std::string_view channel, const Window& w)
{
    const auto& v = tr.values(channel);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
    WindowStats s;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (!w.contains(tr.time()[i])) continue;
        lo = std::min(lo, v[i]);
        hi = std::max(hi, v[i]);
        sum += v[i];
        ++s.samples;
    }
    if (s.samples == 0) throw AnalysisError("window contains no samples");
    s.mean = sum / static_cast<double>(s.samples);
    s.peak_to_peak = hi - lo;
    return s;
}

/// Largest |dx/dt| (pu/s) of the twelve plant states of a time-invariant
/// trace (SI units) inside a window, from the closed-loop field at the logged
/// samples.
inline double max_ssti_rate(const TraceLog& tr, const MmcParams& p, const Window& w,
                            std::optional<Grid> grid = std::nullopt)
{
    const SstiClosedLoop loop(p, grid.value_or(Grid::nominal(p)));
    const LoopVector scale = loop_scale(p);
    std::vector<const std::vector<double>*> cols;
    for (const auto& name : loop_state_labels()) cols.push_back(&tr.values(name));
    const auto& pr = tr.values("p_ref");
    const auto& qr = tr.values("q_ref");
    double worst = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (!w.contains(tr.time()[i])) continue;
        LoopVector x;
        for (int k = 0; k < 16; ++k) x(k) = (*cols[static_cast<std::size_t>(k)])[i];
        const LoopVector d = loop(x, Refs{pr[i], qr[i], Vec2::Zero()}).cwiseQuotient(scale);
        worst = std::max(worst, d.head<12>().cwiseAbs().maxCoeff());
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Cross-model bounds
// ---------------------------------------------------------------------------

enum class Metric { Rms, Bias };

struct ErrorBound {
    std::string channel;
    Metric metric;
    double limit;  // pu
};

/// Per-channel tolerances between the projected arm-averaged run and the
/// time-invariant run. The zero-sequence entry is evaluated with the
/// post-event transient windows left out.
inline const std::vector<ErrorBound>& cross_model_bounds()
{
    static const std::vector<ErrorBound> bounds = {
        {"i_delta_d", Metric::Rms, 1e-3},   {"i_delta_q", Metric::Rms, 1e-3},
        {"v_c_delta_d", Metric::Rms, 2e-3}, {"v_c_delta_q", Metric::Rms, 2e-3},
        {"v_c_sigma_d", Metric::Rms, 5e-3}, {"v_c_sigma_q", Metric::Rms, 5e-3},
        {"v_c_sigma_z", Metric::Rms, 5e-3}, {"i_sigma_z", Metric::Rms, 1e-3},
        {"i_sigma_d", Metric::Bias, 1e-3},  {"i_sigma_q", Metric::Bias, 1e-3},
        {"v_c_delta_z", Metric::Rms, 2e-3},
    };
    return bounds;
}

inline const std::vector<std::string>& compared_channels()
{
    static const std::vector<std::string> names = {
        "i_delta_d",   "i_delta_q",   "v_c_delta_d", "v_c_delta_q", "v_c_sigma_d", "v_c_sigma_q", "v_c_sigma_z",
        "i_sigma_d",   "i_sigma_q",   "i_sigma_z",   "v_c_delta_z", "p",           "q"};
    return names;
}

struct BoundCheck {
    ErrorBound bound;
    double value = 0.0;
    [[nodiscard]] bool pass() const { return std::abs(value) < bound.limit; }
};

struct CrossModelResult {
    CompareReport report;            // full run
    CompareReport zero_sequence;     // v_c_delta_z without the post-event windows
    std::vector<BoundCheck> checks;

    [[nodiscard]] bool pass() const
    {
        return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.pass(); });
    }
};

/// Length of the transient window left out of the zero-sequence comparison
/// after each reference step.
inline constexpr double kZeroSequenceTransient = 0.05;

/// Converts to per unit and compares the two runs of a scenario. Phase-domain
/// traces are projected first. The bias metric averages whole periods of 2w,
/// so the 6w ripple that only the arm-averaged run carries does not bias it.
inline CrossModelResult cross_model_compare(const TraceLog& aam, const TraceLog& ssti, const Scenario& sc,
                                            const MmcParams& p)
{
    auto prepare = [&](const TraceLog& tr) {
        return to_per_unit(tr.has_channel("i_delta_a") ? project_aam_trace(tr, p) : tr, p);
    };
    const TraceLog a = prepare(aam);
    const TraceLog b = prepare(ssti);
    CompareOptions opt;
    opt.steady_state = sc.steady_state_windows();
    opt.bias_period = 1.0 / (2.0 * p.f_nominal);

    CrossModelResult r;
    r.report = compare_traces(a, b, compared_channels(), opt);
    CompareOptions zopt = opt;
    for (const auto& e : sc.events) zopt.exclude.push_back({e.time, e.time + kZeroSequenceTransient});
    r.zero_sequence = compare_traces(a, b, {"v_c_delta_z"}, zopt);
    for (const auto& bound : cross_model_bounds()) {
        const ChannelError& c =
            bound.channel == "v_c_delta_z" ? r.zero_sequence.at(bound.channel) : r.report.at(bound.channel);
        r.checks.push_back({bound, bound.metric == Metric::Rms ? c.rms : c.ss_bias});
    }
    return r;
}

inline void write_report_csv(std::ostream& out, const CompareReport& r)
{
    out << "channel,rms,max_abs,ss_bias\n";
    for (const auto& c : r.channels) {
        out << c.channel << ',' << format_value(c.rms) << ',' << format_value(c.max_abs) << ','
            << format_value(c.ss_bias) << '\n';
    }
}

inline void write_report_text(std::ostream& out, const CompareReport& r)
{
    for (const auto& c : r.channels) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-14s rms %.3e  max %.3e  bias %+.3e\n", c.channel.c_str(), c.rms, c.max_abs,
                      c.ss_bias);
        out << buf;
    }
}

}  // namespace mmc
