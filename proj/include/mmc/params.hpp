#pragma once

// Physical, control and per-unit parameters of a single MMC terminal, plus
// the key-value configuration format used to load and save them.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mmc {

/// Raised for any invalid parameter set or malformed configuration text.
class ParamError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct MmcParams {
    double u1n_ac_voltage = 320e3;  // V, line-to-line RMS
    double f_nominal = 50.0;        // Hz
    int n_submodules = 400;
    double c_arm = 32.55e-6;  // F
    double r_arm = 1.024;     // Ohm
    double l_arm = 48.9e-3;   // H
    double r_f = 0.512;       // Ohm
    double l_f = 58.7e-3;     // H
    double v_dc_nominal = 640e3;  // V
    double r_eq_ac = 0.512 + 1.024 / 2;    // derived
    double l_eq_ac = 58.7e-3 + 48.9e-3 / 2;  // derived
    double kp_sigma = 0.1253;    // pu
    double tau_i_sigma = 0.0149;  // s
    double kp_delta = 0.8523;    // pu
    double tau_i_delta = 0.0019;  // s
    double s_base = 1000e6;       // VA
    double v_base_ac = 320e3 * std::numbers::sqrt2 / std::numbers::sqrt3;  // V, peak phase
    double v_base_dc = 640e3;     // V

    [[nodiscard]] double omega() const { return 2.0 * std::numbers::pi * f_nominal; }

    /// Peak phase current base matching the amplitude-invariant power convention
    /// p = v_d i_d + v_q i_q in per unit.
    [[nodiscard]] double i_base() const { return 2.0 * s_base / (3.0 * v_base_ac); }
    [[nodiscard]] double z_base() const { return v_base_ac / i_base(); }

    bool operator==(const MmcParams&) const = default;
};

/// Recomputes r_eq_ac and l_eq_ac from the primitive fields.
inline void derive(MmcParams& p)
{
    p.r_eq_ac = p.r_f + p.r_arm / 2.0;
    p.l_eq_ac = p.l_f + p.l_arm / 2.0;
}

inline void validate(const MmcParams& p)
{
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ParamError(std::string(name) + " must be positive");
        }
    };
    positive(p.u1n_ac_voltage, "u1n_ac_voltage");
    positive(p.f_nominal, "f_nominal");
    if (p.n_submodules <= 0) throw ParamError("n_submodules must be positive");
    positive(p.c_arm, "c_arm");
    positive(p.r_arm, "r_arm");
    positive(p.l_arm, "l_arm");
    positive(p.r_f, "r_f");
    positive(p.l_f, "l_f");
    positive(p.v_dc_nominal, "v_dc_nominal");
    positive(p.kp_sigma, "kp_sigma");
    positive(p.tau_i_sigma, "tau_i_sigma");
    positive(p.kp_delta, "kp_delta");
    positive(p.tau_i_delta, "tau_i_delta");
    positive(p.s_base, "s_base");
    positive(p.v_base_ac, "v_base_ac");
    positive(p.v_base_dc, "v_base_dc");
    if (p.r_eq_ac != p.r_f + p.r_arm / 2.0) throw ParamError("r_eq_ac must equal r_f + r_arm/2");
    if (p.l_eq_ac != p.l_f + p.l_arm / 2.0) throw ParamError("l_eq_ac must equal l_f + l_arm/2");
}

/// The lossless variant sets every resistance to zero. It is only used for
/// structural spectrum checks and deliberately bypasses validate().
inline MmcParams lossless(MmcParams p)
{
    p.r_arm = 0.0;
    p.r_f = 0.0;
    derive(p);
    return p;
}

enum class TauUnit { Seconds, Milliseconds };

/// Nominal 1000 MVA, +/-320 kV terminal. The integral time constants are
/// 0.0019 and 0.0149, in seconds or in milliseconds.
inline MmcParams nominal_params(TauUnit unit = TauUnit::Seconds)
{
    MmcParams p;
    if (unit == TauUnit::Milliseconds) {
        p.tau_i_sigma = 0.0149e-3;
        p.tau_i_delta = 0.0019e-3;
    }
    derive(p);
    return p;
}

// ---------------------------------------------------------------------------
// Per-unit conversion
// ---------------------------------------------------------------------------

enum class Quantity { AcVoltage, DcVoltage, Current, Power };

inline Quantity parse_quantity(std::string_view s)
{
    if (s == "ac-voltage") return Quantity::AcVoltage;
    if (s == "dc-voltage") return Quantity::DcVoltage;
    if (s == "current") return Quantity::Current;
    if (s == "power") return Quantity::Power;
    throw ParamError("unknown per-unit kind '" + std::string(s) + "'");
}

inline double base_of(Quantity kind, const MmcParams& p)
{
    switch (kind) {
        case Quantity::AcVoltage: return p.v_base_ac;
        case Quantity::DcVoltage: return p.v_base_dc;
        case Quantity::Current: return p.i_base();
        case Quantity::Power: return p.s_base;
    }
    throw ParamError("unknown per-unit kind");
}

inline double to_per_unit(double value, Quantity kind, const MmcParams& p)
{
    return value / base_of(kind, p);
}

inline double from_per_unit(double value, Quantity kind, const MmcParams& p)
{
    return value * base_of(kind, p);
}

// ---------------------------------------------------------------------------
// Configuration text
//
//   # comment
//   u1n_kv = 320
//
// Every key below is required except the two base overrides.
// ---------------------------------------------------------------------------

namespace detail {

struct KeySpec {
    const char* key;
    double MmcParams::*field;
    int exp10;  // SI = text * 10^exp10
    bool required;
};

inline const std::vector<KeySpec>& key_specs()
{
    static const std::vector<KeySpec> specs = {
        {"u1n_kv", &MmcParams::u1n_ac_voltage, 3, true},
        {"fn_hz", &MmcParams::f_nominal, 0, true},
        {"c_arm_uf", &MmcParams::c_arm, -6, true},
        {"r_arm_ohm", &MmcParams::r_arm, 0, true},
        {"l_arm_mh", &MmcParams::l_arm, -3, true},
        {"r_f_ohm", &MmcParams::r_f, 0, true},
        {"l_f_mh", &MmcParams::l_f, -3, true},
        {"v_dc_kv", &MmcParams::v_dc_nominal, 3, true},
        {"kp_sigma", &MmcParams::kp_sigma, 0, true},
        {"tau_i_sigma_s", &MmcParams::tau_i_sigma, 0, true},
        {"kp_delta", &MmcParams::kp_delta, 0, true},
        {"tau_i_delta_s", &MmcParams::tau_i_delta, 0, true},
        {"s_base_mva", &MmcParams::s_base, 6, true},
        {"v_base_ac_kv", &MmcParams::v_base_ac, 3, false},
        {"v_base_dc_kv", &MmcParams::v_base_dc, 3, false},
    };
    return specs;
}

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_number(const std::string& text, const std::string& key)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParamError("cannot parse value '" + text + "' for key " + key);
    }
}

/// Parses `key = value` lines, rejecting duplicates. Comments start with '#'.
inline std::map<std::string, std::string> parse_key_values(std::istream& in)
{
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ParamError("line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        std::string key = trim(std::string_view(body).substr(0, eq));
        std::string value = trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) throw ParamError("line " + std::to_string(lineno) + ": empty key");
        if (kv.contains(key)) throw ParamError("duplicate key " + key);
        kv.emplace(std::move(key), std::move(value));
    }
    return kv;
}

/// Parses `text` and multiplies by 10^exp10 by shifting the decimal exponent,
/// so the result is the double nearest to the written decimal value.
inline double parse_scaled(const std::string& text, int exp10, const std::string& key)
{
    const double v = parse_number(text, key);
    if (!std::isfinite(v) || exp10 == 0) return v * std::pow(10.0, exp10);
    const auto e = text.find_first_of("eE");
    const int exponent = e == std::string::npos ? 0 : std::stoi(text.substr(e + 1));
    return std::stod(text.substr(0, e) + "e" + std::to_string(exponent + exp10));
}

/// Shortest text that parse_scaled() maps back to exactly `si`.
inline std::string exact_scaled_text(double si, int exp10)
{
    char buf[64];
    for (int prec = 0; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*e", prec, si);
        if (std::stod(buf) == si) break;
    }
    std::string text(buf);
    const auto e = text.find('e');
    const int exponent = std::stoi(text.substr(e + 1)) - exp10;
    const std::string mantissa = text.substr(0, e);
    return exponent == 0 ? mantissa : mantissa + "e" + std::to_string(exponent);
}

}  // namespace detail

inline MmcParams params_from_text(std::istream& in)
{
    auto kv = detail::parse_key_values(in);
    MmcParams p;
    bool base_ac_given = false;
    bool base_dc_given = false;

    // n_sm is an integer; handled apart from the floating-point table.
    if (auto it = kv.find("n_sm"); it != kv.end()) {
        const double n = detail::parse_number(it->second, "n_sm");
        if (n != std::floor(n)) throw ParamError("n_sm must be an integer");
        if (n <= 0) throw ParamError("n_submodules must be positive");
        p.n_submodules = static_cast<int>(n);
        kv.erase(it);
    } else {
        throw ParamError("missing key n_sm");
    }

    for (const auto& spec : detail::key_specs()) {
        auto it = kv.find(spec.key);
        if (it == kv.end()) {
            if (spec.required) throw ParamError(std::string("missing key ") + spec.key);
            continue;
        }
        p.*spec.field = detail::parse_scaled(it->second, spec.exp10, spec.key);
        if (std::string_view(spec.key) == "v_base_ac_kv") base_ac_given = true;
        if (std::string_view(spec.key) == "v_base_dc_kv") base_dc_given = true;
        kv.erase(it);
    }
    if (!kv.empty()) throw ParamError("unknown key " + kv.begin()->first);

    if (!base_ac_given) p.v_base_ac = p.u1n_ac_voltage * std::numbers::sqrt2 / std::numbers::sqrt3;
    if (!base_dc_given) p.v_base_dc = p.v_dc_nominal;
    derive(p);
    validate(p);
    return p;
}

inline MmcParams params_from_string(const std::string& text)
{
    std::istringstream in(text);
    return params_from_text(in);
}

inline MmcParams load_params(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ParamError("cannot open parameter file " + path);
    return params_from_text(in);
}

/// Writes every field, including the base overrides, so that reading the
/// text back reproduces the value bit for bit.
inline std::string params_to_text(const MmcParams& p)
{
    std::ostringstream out;
    out << "# MMC terminal parameters\n";
    out << "n_sm = " << p.n_submodules << "\n";
    for (const auto& spec : detail::key_specs()) {
        out << spec.key << " = " << detail::exact_scaled_text(p.*spec.field, spec.exp10) << "\n";
    }
    return out.str();
}

inline void save_params(const MmcParams& p, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw ParamError("cannot write parameter file " + path);
    out << params_to_text(p);
}

}  // namespace mmc
