// mmc: run, compare and linearise the arm-averaged and time-invariant models.
//
// Exit codes: 0 success, 1 cross-model bound exceeded, 2 bad input
// (missing file, malformed configuration, bad arguments), 3 runtime failure
// (trajectory blowup, channel mismatch, no equilibrium).

#include "mmc/mmc.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace mmc;

namespace {

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string params_file = "nominal.params";
    std::string preset;
    std::string scenario_file = "steps.scn";
    std::string out_dir = ".";
    std::string start = "warm";
};

// Relative names are tried as given, then under $MMC_CONFIG_DIR, then in the
// configs directory of the source tree.
std::string resolve_config(const std::string& name)
{
    const fs::path path(name);
    if (fs::exists(path) || path.is_absolute()) return name;
    if (const char* env = std::getenv("MMC_CONFIG_DIR")) {
        if (const fs::path p = fs::path(env) / path; fs::exists(p)) return p.string();
    }
#ifdef MMC_DEFAULT_CONFIG_DIR
    if (const fs::path p = fs::path(MMC_DEFAULT_CONFIG_DIR) / path; fs::exists(p)) return p.string();
#endif
    return name;
}

MmcParams resolve_params(const Common& c)
{
    if (c.preset == "nominal") return nominal_params();
    if (c.preset == "nominal-ms") return nominal_params(TauUnit::Milliseconds);
    if (c.preset == "lossless") return lossless(nominal_params());
    return load_params(resolve_config(c.params_file));
}

Scenario resolve_scenario(const Common& c) { return load_scenario(resolve_config(c.scenario_file)); }

fs::path output_path(const Common& c, const std::string& file)
{
    fs::create_directories(c.out_dir);
    return fs::path(c.out_dir) / file;
}

std::ofstream open_out(const fs::path& path)
{
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

TraceLog load_trace(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open trace file " + path);
    return read_csv(in);
}

TraceLog simulate(Model m, const Scenario& sc, const MmcParams& p, const Common& c, std::optional<double> dt)
{
    RunOptions opt;
    opt.dt = dt;
    if (c.start == "warm") {
        const Equilibrium eq = find_equilibrium(p, sc.refs_at(0.0));
        opt.initial_state = warm_start_state(m, eq, p);
    }
    return run_scenario(m, sc, p, opt);
}

void add_common(CLI::App* cmd, Common& c, bool with_scenario)
{
    cmd->add_option("--params", c.params_file, "parameter file")->capture_default_str();
    cmd->add_option("--preset", c.preset, "built-in parameter set instead of --params")
        ->check(CLI::IsMember({"nominal", "nominal-ms", "lossless"}));
    if (with_scenario) {
        cmd->add_option("--scenario", c.scenario_file, "scenario file")->capture_default_str();
        cmd->add_option("--start", c.start, "initial state: warm (equilibrium) or flat")
            ->check(CLI::IsMember({"warm", "flat"}))
            ->capture_default_str();
    }
    cmd->add_option("--out", c.out_dir, "output directory")->capture_default_str();
}

// ---------------------------------------------------------------------------

int cmd_run(const Common& c, const std::string& model, std::optional<double> dt, bool pu)
{
    const MmcParams p = resolve_params(c);
    const Scenario sc = resolve_scenario(c);
    std::vector<Model> models;
    if (model != "ssti") models.push_back(Model::Aam);
    if (model != "aam") models.push_back(Model::Ssti);
    for (Model m : models) {
        const TraceLog tr = simulate(m, sc, p, c, dt);
        const fs::path path = output_path(c, std::string(model_name(m)) + ".csv");
        auto out = open_out(path);
        write_csv(out, pu ? to_per_unit(tr, p) : tr);
        std::cout << model_name(m) << ": " << tr.size() << " samples, dt " << tr.dt() << " s -> " << path.string()
                  << "\n";
        if (tr.range_violations() > 0) {
            std::cout << "  warning: insertion index outside [0, 1] at " << tr.range_violations()
                      << " samples, first at t = " << *tr.first_range_violation() << " s\n";
        }
    }
    return 0;
}

int cmd_compare(const Common& c, const std::vector<std::string>& traces)
{
    const MmcParams p = resolve_params(c);
    const Scenario sc = resolve_scenario(c);
    TraceLog a, b;
    if (traces.empty()) {
        a = simulate(Model::Aam, sc, p, c, std::nullopt);
        b = simulate(Model::Ssti, sc, p, c, std::nullopt);
    } else {
        a = load_trace(traces.at(0));
        b = load_trace(traces.at(1));
    }
    const CrossModelResult r = cross_model_compare(a, b, sc, p);

    auto csv = open_out(output_path(c, "compare.csv"));
    write_report_csv(csv, r.report);
    const ChannelError& z = r.zero_sequence.at("v_c_delta_z");
    csv << "v_c_delta_z_settled," << format_value(z.rms) << ',' << format_value(z.max_abs) << ','
        << format_value(z.ss_bias) << '\n';

    write_report_text(std::cout, r.report);
    std::cout << "\n";
    for (const auto& chk : r.checks) {
        std::printf("%-4s %-12s %-4s %.3e < %.0e\n", chk.pass() ? "ok" : "FAIL", chk.bound.channel.c_str(),
                    chk.bound.metric == Metric::Rms ? "rms" : "bias", std::abs(chk.value), chk.bound.limit);
    }
    std::cout << (r.pass() ? "all bounds met\n" : "bound exceeded\n");
    return r.pass() ? 0 : 1;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m, const std::vector<std::string>& rows,
                  const std::vector<std::string>& cols)
{
    out << "state";
    for (const auto& n : cols) out << ',' << n;
    out << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out << rows[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << format_value(m(i, j));
        out << '\n';
    }
}

void write_spectrum(std::ostream& out, const std::vector<std::complex<double>>& ev)
{
    out << "real,imag,freq_hz,damping\n";
    for (const auto& e : ev) {
        const double zeta = std::abs(e) > 0 ? -e.real() / std::abs(e) : 1.0;
        out << format_value(e.real()) << ',' << format_value(e.imag()) << ','
            << format_value(std::abs(e.imag()) / (2 * std::numbers::pi)) << ',' << format_value(zeta) << '\n';
    }
}

void print_spectrum(const std::vector<std::complex<double>>& ev)
{
    std::cout << "eigenvalues (1/s):\n";
    for (const auto& e : ev) {
        const double zeta = std::abs(e) > 0 ? -e.real() / std::abs(e) : 1.0;
        std::printf("  %+12.4e %+12.4ej  %8.2f Hz  damping %+.4f\n", e.real(), e.imag(),
                    std::abs(e.imag()) / (2 * std::numbers::pi), zeta);
    }
    const auto& dom = ev.front();
    std::printf("dominant mode %+.4e %+.4ej, %s\n", dom.real(), dom.imag(),
                dom.real() < 0 ? "stable" : "not asymptotically stable");
}

int cmd_linearize(const Common& c, double p_ref, double q_ref, bool write_all)
{
    const MmcParams p = resolve_params(c);
    const Equilibrium eq = find_equilibrium(p, Refs{p_ref, q_ref});
    const LinearModel lm = linearize_closed_loop(eq, p);
    const auto ev = eigenvalues(lm.a_matrix);
    std::printf("equilibrium at p_ref %.4g, q_ref %.4g: residual %.3e pu/s after %d iterations\n", p_ref, q_ref,
                eq.residual_norm, eq.iterations);

    if (write_all) {
        auto xs = open_out(output_path(c, "equilibrium.csv"));
        xs << "state,value_pu\n";
        for (std::size_t i = 0; i < lm.state_labels.size(); ++i)
            xs << lm.state_labels[i] << ',' << format_value(lm.x0(static_cast<Eigen::Index>(i))) << '\n';
        auto am = open_out(output_path(c, "a_matrix.csv"));
        write_matrix(am, lm.a_matrix, lm.state_labels, lm.state_labels);
        auto bm = open_out(output_path(c, "b_matrix.csv"));
        write_matrix(bm, lm.b_matrix, lm.state_labels, lm.input_labels);
    }
    auto sp = open_out(output_path(c, "eigenvalues.csv"));
    write_spectrum(sp, ev);
    print_spectrum(ev);
    return 0;
}

Eigen::MatrixXd read_matrix(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open matrix file " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = detail::split_csv(line);
        std::vector<double> row;
        bool numeric = true;
        for (const auto& cell : cells) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) numeric = false;
            } catch (const std::exception&) {
                numeric = false;
            }
        }
        if (!numeric) {
            // header row, or a leading label column
            if (rows.empty() && cells.size() > 1 && row.empty()) continue;
            row.clear();
            for (std::size_t i = 1; i < cells.size(); ++i) row.push_back(detail::parse_number(cells[i], "matrix"));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw InputError("matrix file " + path + " is empty");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) throw InputError("matrix file " + path + " has ragged rows");
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return m;
}

int cmd_eig(const Common& c, const std::string& matrix, double p_ref, double q_ref)
{
    if (matrix.empty()) return cmd_linearize(c, p_ref, q_ref, false);
    const auto ev = eigenvalues(read_matrix(matrix));
    auto sp = open_out(output_path(c, "eigenvalues.csv"));
    write_spectrum(sp, ev);
    print_spectrum(ev);
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Dual-model MMC toolkit: arm-averaged and time-invariant simulation and analysis"};
    app.require_subcommand(1);

    Common common;
    std::string model = "both";
    std::optional<double> dt;
    bool pu = false;
    std::vector<std::string> traces;
    double p_ref = 1.0, q_ref = 0.0;
    std::string matrix;

    auto* run = app.add_subcommand("run", "simulate a scenario and write trace CSVs");
    add_common(run, common, true);
    run->add_option("--model", model, "aam, ssti or both")
        ->check(CLI::IsMember({"aam", "ssti", "both"}))
        ->capture_default_str();
    run->add_option("--dt", dt, "integration step in seconds")->check(CLI::PositiveNumber);
    run->add_flag("--pu", pu, "write per-unit values");

    auto* compare = app.add_subcommand("compare", "run both models (or read two traces) and check the error bounds");
    add_common(compare, common, true);
    compare->add_option("--traces", traces, "arm-averaged and time-invariant trace CSVs")->expected(2);

    auto* lin = app.add_subcommand("linearize", "equilibrium, state-space matrices and spectrum");
    add_common(lin, common, false);
    lin->add_option("--p-ref", p_ref, "active power reference, pu")->capture_default_str();
    lin->add_option("--q-ref", q_ref, "reactive power reference, pu")->capture_default_str();

    auto* eig = app.add_subcommand("eig", "spectrum of a matrix CSV or of the closed loop at an operating point");
    add_common(eig, common, false);
    eig->add_option("--matrix", matrix, "square matrix CSV");
    eig->add_option("--p-ref", p_ref, "active power reference, pu")->capture_default_str();
    eig->add_option("--q-ref", q_ref, "reactive power reference, pu")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*run) return cmd_run(common, model, dt, pu);
        if (*compare) return cmd_compare(common, traces);
        if (*lin) return cmd_linearize(common, p_ref, q_ref, true);
        if (*eig) return cmd_eig(common, matrix, p_ref, q_ref);
    } catch (const ParamError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const EquilibriumError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const SimulationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const TraceError& e) {
        std::cerr << "error: channel mismatch: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
