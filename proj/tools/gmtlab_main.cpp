#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gmtlab/decompose.hpp"
#include "gmtlab/grid_io.hpp"
#include "gmtlab/scenario.hpp"

using namespace gmtlab;

namespace {

Scenario load_scenario(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw input_error("cannot open scenario file: " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return scenario_from_json(os.str());
}

void apply_overrides(Scenario& s, const std::string& generator, int grid_n, int grid_N,
                     const std::string& out, std::uint64_t seed, int points) {
    if (!generator.empty()) s.generator = generator;
    if (grid_n > 0 || grid_N > 0) {
        int n = grid_n > 0 ? grid_n : s.grid.n;
        int N = grid_N > 0 ? grid_N : s.grid.N;
        s.grid = Grid::centered(n, N, s.grid.L);
    }
    if (!out.empty()) s.out_dir = out;
    if (seed != 0) s.seed = seed;
    if (points > 0) s.point_count = points;
    s.validate();
}

int run_and_print(const Scenario& s) {
    ScenarioOutcome outcome = run_scenario(s);
    std::cout << outcome.summary << "\n";
    std::cout << "report: " << outcome.report_path << "\n";
    return outcome.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"gmtlab — grid-measure decomposition and density certification lab"};
    app.require_subcommand(1);

    std::string scenario_path, generator, out_dir, mu_path, t_path;
    int grid_n = 0, grid_N = 0, points = 0;
    std::uint64_t seed = 0;
    double p = 0.0, radius = 1.0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--scenario", scenario_path, "scenario JSON file");
        cmd->add_option("--generator", generator, "generator name");
        cmd->add_option("--grid-n", grid_n, "ambient dimension");
        cmd->add_option("--grid-N", grid_N, "cells per side (power of two)");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--seed", seed, "deterministic seed");
        cmd->add_option("--points", points, "sample point count");
    };

    auto* run = app.add_subcommand("run", "run a scenario file");
    run->add_option("scenario", scenario_path, "scenario JSON file")->required();
    run->add_option("--out", out_dir, "override output directory");

    auto* dec = app.add_subcommand("decompose", "good/bad decomposition of a grid measure pair");
    dec->add_option("--mu", mu_path, "scalar grid binary file")->required();
    dec->add_option("--t", t_path, "matrix grid binary file")->required();
    dec->add_option("--p", p, "integrability exponent");
    dec->add_option("--radius", radius, "support ball radius");
    dec->add_option("--out", out_dir, "output directory");

    auto* est = app.add_subcommand("estimates", "localized extension estimates sweep");
    add_common(est);
    auto* cert = app.add_subcommand("certify", "density certificates over sampled points");
    add_common(cert);
    auto* scan = app.add_subcommand("scan", "singular ratio scan");
    add_common(scan);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            Scenario s = load_scenario(scenario_path);
            if (!out_dir.empty()) s.out_dir = out_dir;
            return run_and_print(s);
        }
        if (dec->parsed()) {
            auto mu_any = read_grid_binary_file(mu_path);
            auto t_any = read_grid_binary_file(t_path);
            auto* mu = std::get_if<ScalarGridMeasure>(&mu_any);
            auto* T = std::get_if<MatrixGridMeasure>(&t_any);
            if (!mu || !T) throw input_error("decompose expects a scalar mu and a matrix T");
            DecompositionRequest req;
            req.mu = std::move(*mu);
            req.T = std::move(*T);
            req.frame = FrameMatrix::identity(req.mu.grid.n);
            req.p = p;
            req.radius = radius;
            DecompositionResult res = decompose_divergence(req);
            std::string j = decomposition_report_json(res);
            std::cout << j << "\n";
            if (!out_dir.empty()) {
                std::filesystem::create_directories(out_dir);
                std::ofstream(out_dir + "/decomposition.json") << j << '\n';
                write_grid_binary_file(out_dir + "/good.grid",
                                       ScalarGridMeasure(res.grid, res.g));
            }
            return 0;
        }
        Scenario s = scenario_path.empty() ? Scenario{} : load_scenario(scenario_path);
        if (est->parsed()) s.pipeline = "estimates";
        if (cert->parsed()) s.pipeline = "certify";
        if (scan->parsed()) s.pipeline = "scan";
        if (scan->parsed() && generator.empty() && scenario_path.empty()) s.generator = "mixture";
        apply_overrides(s, generator, grid_n, grid_N, out_dir, seed, points);
        return run_and_print(s);
    } catch (const precondition_error& e) {
        // hypothesis failures are reported results, not faults
        std::cout << "hypothesis failure [" << e.name << "]: " << e.what() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
