#include "mmc/params.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

using namespace mmc;

namespace {

const char* kNominalText = R"(
# nominal terminal
u1n_kv = 320
fn_hz = 50
n_sm = 400
c_arm_uf = 32.55
r_arm_ohm = 1.024
l_arm_mh = 48.9
r_f_ohm = 0.512
l_f_mh = 58.7
v_dc_kv = 640
kp_sigma = 0.1253
tau_i_sigma_s = 0.0149
kp_delta = 0.8523
tau_i_delta_s = 0.0019
s_base_mva = 1000
)";

std::string replace_line(std::string text, const std::string& key, const std::string& line)
{
    const auto pos = text.find(key + " =");
    const auto end = text.find('\n', pos);
    return text.replace(pos, end - pos, line);
}

}  // namespace

TEST(LoadParams, NominalValues)
{
    const MmcParams p = params_from_string(kNominalText);
    EXPECT_DOUBLE_EQ(p.u1n_ac_voltage, 320e3);
    EXPECT_DOUBLE_EQ(p.f_nominal, 50.0);
    EXPECT_EQ(p.n_submodules, 400);
    EXPECT_DOUBLE_EQ(p.c_arm, 32.55e-6);
    EXPECT_DOUBLE_EQ(p.r_arm, 1.024);
    EXPECT_DOUBLE_EQ(p.l_arm, 48.9e-3);
    EXPECT_DOUBLE_EQ(p.r_f, 0.512);
    EXPECT_DOUBLE_EQ(p.l_f, 58.7e-3);
    EXPECT_DOUBLE_EQ(p.kp_sigma, 0.1253);
    EXPECT_DOUBLE_EQ(p.kp_delta, 0.8523);
    EXPECT_DOUBLE_EQ(p.tau_i_sigma, 0.0149);
    EXPECT_DOUBLE_EQ(p.tau_i_delta, 0.0019);
    EXPECT_DOUBLE_EQ(p.v_base_dc, 640e3);
}

TEST(LoadParams, MatchesBuiltInPreset)
{
    EXPECT_EQ(params_from_string(kNominalText), nominal_params());
}

TEST(LoadParams, DerivedInductance)
{
    const MmcParams p = params_from_string(kNominalText);
    EXPECT_NEAR(p.l_eq_ac, 83.15e-3, 1e-15);
    EXPECT_NEAR(p.r_eq_ac, 1.024, 1e-15);
}

TEST(LoadParams, NegativeArmInductance)
{
    const auto text = replace_line(kNominalText, "l_arm_mh", "l_arm_mh = -1");
    try {
        params_from_string(text);
        FAIL() << "expected ParamError";
    } catch (const ParamError& e) {
        EXPECT_STREQ(e.what(), "l_arm must be positive");
    }
}

TEST(LoadParams, ErrorsNameTheKey)
{
    auto message = [](const std::string& text) {
        try {
            params_from_string(text);
        } catch (const ParamError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    EXPECT_NE(message(replace_line(kNominalText, "c_arm_uf", "")).find("c_arm_uf"), std::string::npos);
    EXPECT_NE(message(replace_line(kNominalText, "fn_hz", "fn_hz = fifty")).find("fn_hz"), std::string::npos);
    EXPECT_NE(message(replace_line(kNominalText, "r_f_ohm", "r_f_ohm = 0")).find("r_f"), std::string::npos);
    EXPECT_NE(message(std::string(kNominalText) + "bogus = 1\n").find("bogus"), std::string::npos);
    EXPECT_NE(message(std::string(kNominalText) + "kp_delta = 1\n").find("kp_delta"), std::string::npos);
    EXPECT_NE(message(replace_line(kNominalText, "n_sm", "n_sm = 2.5")).find("n_sm"), std::string::npos);
}

TEST(LoadParams, MissingFile)
{
    EXPECT_THROW(load_params("/nonexistent/dir/nominal.params"), ParamError);
}

TEST(Validate, RejectsInconsistentDerivedFields)
{
    MmcParams p = nominal_params();
    p.l_eq_ac += 1e-9;
    EXPECT_THROW(validate(p), ParamError);
    derive(p);
    EXPECT_NO_THROW(validate(p));
}

TEST(Validate, RejectsNonFinite)
{
    MmcParams p = nominal_params();
    p.c_arm = std::numeric_limits<double>::infinity();
    EXPECT_THROW(validate(p), ParamError);
}

TEST(Validate, LosslessBypassesValidation)
{
    const MmcParams p = lossless(nominal_params());
    EXPECT_EQ(p.r_eq_ac, 0.0);
    EXPECT_THROW(validate(p), ParamError);
}

TEST(TauUnit, MillisecondPreset)
{
    const MmcParams p = nominal_params(TauUnit::Milliseconds);
    EXPECT_DOUBLE_EQ(p.tau_i_sigma, 0.0149e-3);
    EXPECT_DOUBLE_EQ(p.tau_i_delta, 0.0019e-3);
}

TEST(PerUnit, ValueEqualsBase)
{
    MmcParams p = nominal_params();
    p.v_base_ac = 320e3;
    EXPECT_DOUBLE_EQ(to_per_unit(320e3, Quantity::AcVoltage, p), 1.0);
}

TEST(PerUnit, ZeroCurrent)
{
    EXPECT_EQ(to_per_unit(0.0, Quantity::Current, nominal_params()), 0.0);
}

TEST(PerUnit, Bases)
{
    const MmcParams p = nominal_params();
    EXPECT_NEAR(p.v_base_ac, 261.2789e3, 0.1);
    EXPECT_NEAR(p.i_base(), 2.0 * 1000e6 / (3.0 * p.v_base_ac), 1e-9);
    EXPECT_NEAR(p.z_base(), 102.4, 1e-9);
    EXPECT_EQ(base_of(Quantity::Power, p), 1000e6);
    EXPECT_EQ(base_of(Quantity::DcVoltage, p), 640e3);
}

TEST(PerUnit, UnknownKind)
{
    EXPECT_EQ(parse_quantity("current"), Quantity::Current);
    EXPECT_THROW(parse_quantity("flux"), ParamError);
}

TEST(PerUnit, RandomRoundTrip)
{
    const MmcParams p = nominal_params();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> mag(-1e7, 1e7);
    for (Quantity k : {Quantity::AcVoltage, Quantity::DcVoltage, Quantity::Current, Quantity::Power}) {
        for (int i = 0; i < 1000; ++i) {
            const double v = mag(rng);
            EXPECT_NEAR(from_per_unit(to_per_unit(v, k, p), k, p), v, 1e-14 * std::abs(v));
        }
    }
}

TEST(Serialization, RoundTripNominal)
{
    const MmcParams p = nominal_params();
    EXPECT_EQ(params_from_string(params_to_text(p)), p);
}

TEST(Serialization, RoundTripRandomIsBitIdentical)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> factor(0.1, 10.0);
    for (int trial = 0; trial < 200; ++trial) {
        MmcParams p = nominal_params();
        for (const auto& spec : detail::key_specs()) p.*spec.field *= factor(rng);
        p.n_submodules = 1 + trial;
        derive(p);
        const MmcParams back = params_from_string(params_to_text(p));
        for (const auto& spec : detail::key_specs()) {
            EXPECT_EQ(back.*spec.field, p.*spec.field) << spec.key;
        }
        EXPECT_EQ(back, p);
    }
}

TEST(Serialization, SaveAndLoadFile)
{
    const auto path = std::filesystem::temp_directory_path() / "mmc_params_roundtrip.params";
    const MmcParams p = nominal_params(TauUnit::Milliseconds);
    save_params(p, path.string());
    EXPECT_EQ(load_params(path.string()), p);
    std::filesystem::remove(path);
}

TEST(Derive, IdentitiesHoldForRandomPrimitives)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(1e-3, 10.0);
    for (int i = 0; i < 500; ++i) {
        MmcParams p = nominal_params();
        p.r_f = u(rng);
        p.r_arm = u(rng);
        p.l_f = u(rng) * 1e-2;
        p.l_arm = u(rng) * 1e-2;
        derive(p);
        EXPECT_EQ(p.r_eq_ac, p.r_f + p.r_arm / 2.0);
        EXPECT_EQ(p.l_eq_ac, p.l_f + p.l_arm / 2.0);
        EXPECT_NO_THROW(validate(p));
    }
}
