#include "mmc/analysis.hpp"
#include "mmc/sim.hpp"
#include "mmc/trace.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace mmc;

namespace {

using Vec1 = Eigen::Matrix<double, 1, 1>;

double window_mean(const TraceLog& tr, const std::string& name, Window w)
{
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (w.contains(tr.time()[i])) {
            s += tr.values(name)[i];
            ++n;
        }
    }
    return s / n;
}

}  // namespace

TEST(Rk4Step, DecayingScalar)
{
    const Vec1 x = rk4_step([](double, const Vec1& v) { return Vec1(-v); }, Vec1(1.0), 0.0, 0.1);
    EXPECT_NEAR(x(0), 0.9048375, 1e-7);
    EXPECT_DOUBLE_EQ(x(0), 1 - 0.1 + 0.01 / 2 - 0.001 / 6 + 0.0001 / 24);
}

TEST(Rk4Step, ZeroField)
{
    const Eigen::Vector3d x(1.5, -2.0, 3.25);
    EXPECT_EQ(rk4_step([](double, const Eigen::Vector3d&) { return Eigen::Vector3d::Zero().eval(); }, x, 0.0, 0.3), x);
}

TEST(Rk4Step, HarmonicOscillatorEnergy)
{
    const double w = 2 * std::numbers::pi * 50.0, dt = 1.0 / 50.0 / 1000.0;
    Eigen::Vector2d x(1.0, 0.0);
    auto f = [w](double, const Eigen::Vector2d& v) { return Eigen::Vector2d(w * v(1), -w * v(0)); };
    for (int k = 0; k < 10000; ++k) x = rk4_step(f, x, k * dt, dt);
    EXPECT_LT(std::abs(x.squaredNorm() - 1.0), 1e-8);
    EXPECT_NEAR(x(0), std::cos(w * 10000 * dt), 1e-7);
}

TEST(Rk4Step, NonFiniteDerivativeCarriesTime)
{
    try {
        rk4_step([](double t, const Vec1&) { return Vec1(t > 0.24 ? std::nan("") : 1.0); }, Vec1(0.0), 0.2, 0.1);
        FAIL() << "expected SimulationError";
    } catch (const SimulationError& e) {
        EXPECT_NEAR(e.time, 0.25, 1e-15);
        EXPECT_NE(std::string(e.what()).find("0.25"), std::string::npos);
    }
}

TEST(ScenarioTest, ReferenceSteps)
{
    const Scenario sc = reference_steps();
    EXPECT_EQ(sc.duration, 0.3);
    ASSERT_EQ(sc.events.size(), 2u);
    EXPECT_EQ(sc.events[0].time, 0.05);
    EXPECT_EQ(sc.events[0].field, RefField::Q);
    EXPECT_EQ(sc.events[0].value, -0.1);
    EXPECT_EQ(sc.events[1].time, 0.15);
    EXPECT_EQ(sc.events[1].field, RefField::P);
    EXPECT_EQ(sc.events[1].value, 0.5);
    EXPECT_EQ(sc.p_ref0, 1.0);
    EXPECT_EQ(sc.q_ref0, 0.0);
    const Refs r = sc.refs_at(0.2);
    EXPECT_EQ(r.p_ref, 0.5);
    EXPECT_EQ(r.q_ref, -0.1);
}

TEST(ScenarioTest, SteadyStateWindows)
{
    const auto w = reference_steps().steady_state_windows();
    ASSERT_EQ(w.size(), 3u);
    EXPECT_NEAR(w[0].begin, 0.035, 1e-12);
    EXPECT_NEAR(w[0].end, 0.05, 1e-12);
    EXPECT_NEAR(w[1].begin, 0.12, 1e-12);
    EXPECT_NEAR(w[1].end, 0.15, 1e-12);
    EXPECT_NEAR(w[2].begin, 0.255, 1e-12);
    EXPECT_NEAR(w[2].end, 0.3, 1e-12);
}

TEST(ScenarioTest, ParseText)
{
    std::istringstream in("duration_s = 0.3\n# steps\np_ref = 1\nq_ref = 0\nevent = 0.05 q_ref -0.1\n"
                          "event = 0.15 p_ref 0.5\ndt_s = 2.5e-5\n");
    const Scenario sc = scenario_from_text(in);
    const Scenario ref = reference_steps();
    EXPECT_EQ(sc.duration, ref.duration);
    EXPECT_EQ(*sc.dt, 2.5e-5);
    ASSERT_EQ(sc.events.size(), 2u);
    EXPECT_EQ(sc.events[1].time, 0.15);
    EXPECT_EQ(sc.events[1].value, 0.5);
}

TEST(ScenarioTest, Rejections)
{
    auto parse = [](const std::string& s) {
        std::istringstream in(s);
        return scenario_from_text(in);
    };
    EXPECT_THROW(parse("p_ref = 1\n"), ScenarioError);
    EXPECT_THROW(parse("duration_s = 0.3\nevent = 0.5 p_ref 1\n"), ScenarioError);
    EXPECT_THROW(parse("duration_s = 0.3\nevent = 0.2 p_ref 1\nevent = 0.1 q_ref 0\n"), ScenarioError);
    EXPECT_THROW(parse("duration_s = 0.3\nevent = 0.2 v_ref 1\n"), ScenarioError);
    EXPECT_THROW(parse("duration_s = 0.3\nspeed = 2\n"), ScenarioError);
    EXPECT_THROW(parse("duration_s = 0.3\ndt_s = 0.3\n"), ScenarioError);
    EXPECT_THROW(load_scenario("/nonexistent/steps.scn"), ScenarioError);
}

TEST(RunScenario, DurationNotLongerThanStep)
{
    const MmcParams p = nominal_params();
    Scenario sc;
    sc.duration = 50e-6;
    sc.events.clear();
    RunOptions opt;
    opt.dt = 50e-6;
    EXPECT_THROW(run_scenario(Model::Ssti, sc, p, opt), ScenarioError);
    sc.duration = 0.0;
    EXPECT_THROW(run_scenario(Model::Aam, sc, p), ScenarioError);
}

TEST(RunScenario, BitIdenticalRepeats)
{
    const MmcParams p = nominal_params();
    Scenario sc = reference_steps().truncated(0.06);
    for (Model m : {Model::Aam, Model::Ssti}) {
        const TraceLog a = run_scenario(m, sc, p), b = run_scenario(m, sc, p);
        EXPECT_TRUE(a == b) << model_name(m);
    }
}

TEST(RunScenario, ChannelsAndTimeBase)
{
    const MmcParams p = nominal_params();
    Scenario sc = reference_steps().truncated(0.01);
    const TraceLog s = run_scenario(Model::Ssti, sc, p);
    EXPECT_EQ(s.size(), 201u);
    EXPECT_EQ(s.time()[1], 50e-6);
    for (const char* n : {"v_c_delta_Zd", "v_c_delta_Zq", "i_sigma_z", "i_delta_q", "v_c_delta_z", "m_delta_Zq",
                          "int_i_sigma_q", "p", "q", "p_ref", "q_ref"})
        EXPECT_TRUE(s.has_channel(n)) << n;
    EXPECT_EQ(s.channel("i_sigma_d").unit, "A");
    EXPECT_EQ(s.channel("v_c_sigma_z").unit, "V");

    const TraceLog a = run_scenario(Model::Aam, sc, p);
    EXPECT_EQ(a.size(), 1001u);
    EXPECT_EQ(a.time().back(), 1000 * 10e-6);
    for (const char* n : {"i_delta_a", "i_sigma_c", "v_c_sigma_b", "v_c_delta_a", "m_sigma_a", "m_delta_c"})
        EXPECT_TRUE(a.has_channel(n)) << n;

    RunOptions opt;
    opt.dt = 25e-6;
    const TraceLog f = run_scenario(Model::Ssti, sc, p, opt);
    EXPECT_EQ(f.time()[1] - f.time()[0], 25e-6);
    EXPECT_EQ(f.size(), 401u);
}

TEST(RunScenario, EventsAlignedToStepGrid)
{
    const MmcParams p = nominal_params();
    Scenario sc = reference_steps().truncated(0.16);
    const TraceLog tr = run_scenario(Model::Ssti, sc, p);
    const auto& q = tr.values("q_ref");
    const auto& pr = tr.values("p_ref");
    EXPECT_EQ(q[999], 0.0);
    EXPECT_EQ(q[1000], -0.1);
    EXPECT_EQ(pr[2999], 1.0);
    EXPECT_EQ(pr[3000], 0.5);
}

TEST(RunScenario, BlowupReportsTime)
{
    const MmcParams p = nominal_params();
    Scenario sc = reference_steps().truncated(0.01);
    RunOptions opt;
    LoopVector x = ssti_loop_flat_start(p);
    x(3) = std::numeric_limits<double>::infinity();
    opt.initial_state = x;
    EXPECT_THROW(run_scenario(Model::Ssti, sc, p, opt), SimulationError);
}

TEST(RunScenario, RangeViolationsFlaggedAndRunContinues)
{
    const MmcParams p = nominal_params();
    Scenario sc = reference_steps().truncated(0.05);
    const TraceLog tr = run_scenario(Model::Aam, sc, p);
    EXPECT_EQ(tr.size(), 5001u);
    EXPECT_GT(tr.range_violations(), 0u);
    ASSERT_TRUE(tr.first_range_violation().has_value());
    EXPECT_GE(*tr.first_range_violation(), 0.0);
}

// Successive refinements of the arm-averaged closed loop.
TEST(RunScenario, FourthOrderConvergence)
{
    const MmcParams p = nominal_params();
    Scenario sc;
    sc.duration = 0.02;
    sc.events.clear();
    std::vector<Eigen::VectorXd> ends;
    for (double dt : {40e-6, 20e-6, 10e-6}) {
        RunOptions opt;
        opt.dt = dt;
        const TraceLog tr = to_per_unit(run_scenario(Model::Aam, sc, p, opt), p);
        Eigen::VectorXd x(12);
        for (int i = 0; i < 12; ++i) x(i) = tr.channels()[i].values.back();
        ends.push_back(x);
    }
    const double ratio = (ends[0] - ends[1]).norm() / (ends[1] - ends[2]).norm();
    EXPECT_GE(ratio, 12.0);
    EXPECT_LE(ratio, 20.0);
}

TEST(RunScenario, DcCapacitorSumChangesWithEachStep)
{
    const MmcParams p = nominal_params();
    const Equilibrium eq = find_equilibrium(p, Refs{1.0, 0.0});
    RunOptions opt;
    opt.initial_state = warm_start_state(Model::Aam, eq, p);
    const Scenario sc = reference_steps();
    const TraceLog tr = to_per_unit(project_aam_trace(run_scenario(Model::Aam, sc, p, opt), p), p);
    const auto w = sc.steady_state_windows();
    const double a = window_mean(tr, "v_c_sigma_z", w[0]);
    const double b = window_mean(tr, "v_c_sigma_z", w[1]);
    const double c = window_mean(tr, "v_c_sigma_z", w[2]);
    EXPECT_GT(std::abs(b - a), 1e-3);
    EXPECT_GT(std::abs(c - b), 1e-3);
}

TEST(TraceLogTest, AppendRules)
{
    TraceLog tr(0.1);
    tr.add_channel("x", "V", Quantity::DcVoltage);
    EXPECT_THROW(tr.add_channel("x", "V"), TraceError);
    const std::vector<double> row{1.0};
    tr.append(0.0, row);
    EXPECT_THROW(tr.append(0.0, row), TraceError);
    EXPECT_THROW(tr.append(0.1, std::vector<double>{1.0, 2.0}), TraceError);
    EXPECT_THROW(tr.add_channel("y", "A"), TraceError);
    EXPECT_THROW((void)tr.values("missing"), TraceError);
}

TEST(TraceLogTest, CsvRoundTrip)
{
    const MmcParams p = nominal_params();
    Scenario sc = reference_steps().truncated(0.002);
    const TraceLog tr = run_scenario(Model::Ssti, sc, p);
    std::ostringstream out;
    write_csv(out, tr);
    const std::string text = out.str();
    EXPECT_EQ(text.rfind("time,v_c_delta_d,", 0), 0u);
    EXPECT_NE(text.find("\ns,V,V,"), std::string::npos);
    std::istringstream in(text);
    const TraceLog back = read_csv(in);
    ASSERT_EQ(back.size(), tr.size());
    ASSERT_EQ(back.channels().size(), tr.channels().size());
    for (std::size_t c = 0; c < tr.channels().size(); ++c) {
        EXPECT_EQ(back.channels()[c].name, tr.channels()[c].name);
        for (std::size_t n = 0; n < tr.size(); ++n) {
            const double v = tr.channels()[c].values[n];
            EXPECT_NEAR(back.channels()[c].values[n], v, 1e-8 * std::abs(v) + 1e-300);
        }
    }
    EXPECT_EQ(back.channel("i_delta_d").kind, Quantity::Current);
}

TEST(TraceLogTest, Decimate)
{
    TraceLog tr(1.0);
    tr.add_channel("x", "-");
    for (int i = 0; i < 10; ++i) tr.append(i, std::vector<double>{i * 2.0});
    const TraceLog d = tr.decimate(5);
    ASSERT_EQ(d.size(), 2u);
    EXPECT_EQ(d.time()[1], 5.0);
    EXPECT_EQ(d.values("x")[1], 10.0);
    EXPECT_EQ(d.dt(), 5.0);
    EXPECT_THROW(tr.decimate(0), TraceError);
}
