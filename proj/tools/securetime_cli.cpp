// Command-line front end: runs scenario files through the simulator,
// evaluates traces against the delay-attack bounds, prints the bound set
// for a network envelope, and benchmarks the signature schemes.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include "CLI11.hpp"
#include "securetime/analysis.hpp"
#include "securetime/netsim.hpp"
#include "securetime/scenario.hpp"

namespace {

using namespace securetime;

constexpr int kExitPass = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfigError = 2;

std::uint64_t env_seed() {
    const char* env = std::getenv("SECURETIME_SEED");
    if (env == nullptr) return 0;
    return std::strtoull(env, nullptr, 10);
}

RunReport run_and_report(Simulation& sim, const Scenario& scenario) {
    const Trace& trace = sim.run();
    RunReport report = evaluate(trace);
    report.per_message_overhead_bytes = scenario.mode == SyncMode::kOneStep
                                            ? wire::kOneStepAuthOverheadBytes
                                            : wire::kTwoStepAuthOverheadBytes;
    return report;
}

void write_outputs(const std::string& dir, const std::string& name, const Simulation& sim,
                   const RunReport& report, const CheckResult& verdict) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream csv(dir + "/" + name + ".trace.csv");
        sim.trace().write_csv(csv);
    }
    std::ofstream out(dir + "/" + name + ".report.txt");
    out << report.to_text();
    out << "trace_sha256=" << to_hex(sim.trace().hash()) << '\n';
    for (const auto& line : verdict.lines) out << line << '\n';
}

int cmd_bounds(const std::string& dmin, const std::string& dmax, const std::string& rho) {
    NetParams net;
    net.min_delay_ns = parse_duration_ns(dmin);
    net.max_delay_ns = parse_duration_ns(dmax);
    net.max_drift_ppb = parse_rate_ppb(rho);
    net.validate();
    const BoundsSet bounds = compute_bounds(net);
    std::cout << "eps_m_ns=" << bounds.eps_m_ns << " (" << format_ns(bounds.eps_m_ns) << ")\n";
    std::cout << "eps_1_ns=" << bounds.eps_1_ns << " (" << format_ns(bounds.eps_1_ns) << ")\n";
    std::cout << "eps_2_ns=" << bounds.eps_2_ns << " (" << format_ns(bounds.eps_2_ns) << ")\n";
    return kExitPass;
}

int cmd_run_scenario(const std::string& path, std::uint64_t seed, const std::string& out_dir) {
    Scenario scenario = load_scenario(path);
    Simulation sim(scenario, seed);
    const RunReport report = run_and_report(sim, scenario);
    const CheckResult verdict = check(report, compute_bounds(scenario.net));

    std::cout << report.to_text();
    std::cout << "trace_sha256=" << to_hex(sim.trace().hash()) << '\n';
    for (const auto& line : verdict.lines) std::cout << line << '\n';
    if (!out_dir.empty()) write_outputs(out_dir, scenario.name, sim, report, verdict);
    return verdict.pass ? kExitPass : kExitCheckFailed;
}

int cmd_grid(const std::string& base_path, const std::string& matrix_path, std::uint64_t seed,
             const std::string& out_dir) {
    const Scenario base = load_scenario(base_path);
    std::ifstream matrix(matrix_path);
    if (!matrix) throw ScenarioError("cannot open matrix file '" + matrix_path + "'");

    struct Row {
        std::string name;
        std::string csv;
        bool pass;
    };
    std::vector<Row> rows;
    std::string line;
    while (std::getline(matrix, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string name;
        fields >> name;
        Scenario scenario = base;
        scenario.name = name;
        std::string assignment;
        while (fields >> assignment) apply_override(scenario, assignment);
        scenario.validate();

        Simulation sim(scenario, seed);
        const RunReport report = run_and_report(sim, scenario);
        const CheckResult verdict = check(report, compute_bounds(scenario.net));
        if (!out_dir.empty()) write_outputs(out_dir, name, sim, report, verdict);
        rows.push_back({name, report.to_csv_row(name), verdict.pass});
    }

    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.name < b.name; });
    std::ostringstream summary;
    summary << RunReport::csv_header() << ",pass\n";
    for (const auto& row : rows) summary << row.csv << ',' << (row.pass ? 1 : 0) << '\n';
    std::cout << summary.str();
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream out(out_dir + "/summary.csv");
        out << summary.str();
    }
    const bool all_pass = std::all_of(rows.begin(), rows.end(), [](const Row& r) { return r.pass; });
    return all_pass ? kExitPass : kExitCheckFailed;
}

std::int64_t percentile_ns(std::vector<std::int64_t>& samples, double q) {
    std::sort(samples.begin(), samples.end());
    const std::size_t at = static_cast<std::size_t>(q * static_cast<double>(samples.size() - 1));
    return samples[at];
}

int cmd_bench_crypto(const std::string& scheme_name, std::size_t iters) {
    const crypto::SignatureScheme* scheme = crypto::find_scheme(scheme_name);
    if (scheme == nullptr) throw ScenarioError("unknown scheme '" + scheme_name + "'");

    Rng rng(12345);
    crypto::KeyPair keys = crypto::generate_keypair(*scheme, rng.next_seed32());
    Bytes message;
    rng.fill(message, 88);  // a signed sync message's size

    std::vector<std::int64_t> sign_ns, verify_ns;
    sign_ns.reserve(iters);
    verify_ns.reserve(iters);
    Bytes signature;
    for (std::size_t i = 0; i < iters; ++i) {
        message[0] = static_cast<std::uint8_t>(i);
        auto t0 = std::chrono::steady_clock::now();
        signature = crypto::sign(keys, message);
        auto t1 = std::chrono::steady_clock::now();
        bool ok = crypto::verify(*scheme, keys.pub, message, signature);
        auto t2 = std::chrono::steady_clock::now();
        if (!ok) throw std::runtime_error("self-verification failed");
        sign_ns.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
        verify_ns.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(t2 - t1).count());
    }

    std::cout << "scheme=" << scheme->name << '\n';
    std::cout << "signature_bytes=" << scheme->signature_len << '\n';
    std::cout << "public_key_bytes=" << scheme->public_key_len << '\n';
    std::cout << "iters=" << iters << '\n';
    std::cout << "sign_median_ns=" << percentile_ns(sign_ns, 0.5) << '\n';
    std::cout << "sign_p90_ns=" << percentile_ns(sign_ns, 0.9) << '\n';
    std::cout << "verify_median_ns=" << percentile_ns(verify_ns, 0.5) << '\n';
    std::cout << "verify_p90_ns=" << percentile_ns(verify_ns, 0.9) << '\n';
    std::cout << "sign_verify_median_ns=" << percentile_ns(sign_ns, 0.5) + percentile_ns(verify_ns, 0.5)
              << '\n';
    return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"secure multicast time synchronization: simulator and analysis"};
    app.require_subcommand(1);

    std::string dmin = "0", dmax = "1ms", rho = "100ppm";
    auto* bounds_cmd = app.add_subcommand("bounds", "print the delay-attack bound set for an envelope");
    bounds_cmd->add_option("--dmin", dmin, "minimum one-way delay (e.g. 0, 100us)");
    bounds_cmd->add_option("--dmax", dmax, "maximum one-way delay (e.g. 5ms)");
    bounds_cmd->add_option("--rho", rho, "maximum clock drift (e.g. 100ppm)");

    std::string scenario_path, out_dir;
    std::uint64_t seed = env_seed();
    auto* run_cmd = app.add_subcommand("run-scenario", "run one scenario file and check its report");
    run_cmd->add_option("path", scenario_path, "scenario file")->required();
    run_cmd->add_option("--seed", seed, "seed override (default: scenario seed or SECURETIME_SEED)");
    run_cmd->add_option("--out", out_dir, "directory for trace.csv and report.txt");

    std::string base_path, matrix_path, grid_out;
    std::uint64_t grid_seed = env_seed();
    auto* grid_cmd = app.add_subcommand("grid", "run a scenario across a parameter matrix");
    grid_cmd->add_option("base", base_path, "base scenario file")->required();
    grid_cmd->add_option("matrix", matrix_path, "matrix file: <name> key=value ...")->required();
    grid_cmd->add_option("--seed", grid_seed, "seed override");
    grid_cmd->add_option("--out-dir", grid_out, "directory for per-run outputs and summary.csv");

    std::string scheme_name{crypto::reference_scheme().name};
    std::size_t iters = 2000;
    auto* bench_cmd = app.add_subcommand("bench-crypto", "report sign/verify latencies for a scheme");
    bench_cmd->add_option("--scheme", scheme_name, "ed25519 or hashtag-test");
    bench_cmd->add_option("--iters", iters, "iterations");

    CLI11_PARSE(app, argc, argv);

    try {
        if (bounds_cmd->parsed()) return cmd_bounds(dmin, dmax, rho);
        if (run_cmd->parsed()) return cmd_run_scenario(scenario_path, seed, out_dir);
        if (grid_cmd->parsed()) return cmd_grid(base_path, matrix_path, grid_seed, grid_out);
        if (bench_cmd->parsed()) return cmd_bench_crypto(scheme_name, iters);
    } catch (const ScenarioError& err) {
        std::cerr << "configuration error: " << err.what() << '\n';
        return kExitConfigError;
    } catch (const std::invalid_argument& err) {
        std::cerr << "configuration error: " << err.what() << '\n';
        return kExitConfigError;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kExitCheckFailed;
    }
    return kExitConfigError;
}
