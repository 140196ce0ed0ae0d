#include "gmtlab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "gmtlab/grid_io.hpp"
#include "gmtlab/rng.hpp"
#include "gmtlab/spectral.hpp"

namespace gmtlab {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void Scenario::validate() const {
    static const std::vector<std::string> gens{"square-fubini",      "four-corner-cantor",
                                               "cantor-fragments",   "line-measure",
                                               "annulus",            "mixture"};
    if (std::find(gens.begin(), gens.end(), generator) == gens.end())
        throw parameter_error("unknown generator '" + generator + "'");
    static const std::vector<std::string> pipes{"certify", "decompose", "estimates", "scan"};
    if (std::find(pipes.begin(), pipes.end(), pipeline) == pipes.end())
        throw parameter_error("unknown pipeline '" + pipeline + "'");
    if (cantor_generation < 1 || cantor_generation > 7)
        throw parameter_error("cantor generation must be 1..7");
    if (point_count < 1) throw parameter_error("point count must be positive");
}

Scenario scenario_from_json(const std::string& text) {
    json j = json::parse(text);
    Scenario s;
    if (j.contains("name")) s.name = j["name"].get<std::string>();
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("generator")) {
        const auto& g = j["generator"];
        if (g.is_string()) {
            s.generator = g.get<std::string>();
        } else {
            s.generator = g.at("type").get<std::string>();
            if (g.contains("generation")) s.cantor_generation = g["generation"].get<int>();
            if (g.contains("lines")) s.lines = g["lines"].get<int>();
        }
    }
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        int n = g.value("n", 2);
        int N = g.value("N", 128);
        double L = g.value("L", 4.0);
        s.grid = Grid::centered(n, N, L);
    }
    if (j.contains("analyzer")) {
        const auto& a = j["analyzer"];
        s.analyzer.tau = a.value("tau", s.analyzer.tau);
        s.analyzer.delta = a.value("delta", s.analyzer.delta);
        s.analyzer.eps = a.value("eps", s.analyzer.eps);
        s.analyzer.doubling_C = a.value("doubling_C", s.analyzer.doubling_C);
        s.analyzer.p = a.value("p", s.analyzer.p);
        s.analyzer.D = a.value("D", s.analyzer.D);
        s.analyzer.r0 = a.value("r0", s.analyzer.r0);
        s.analyzer.ladder_steps = a.value("ladder_steps", s.analyzer.ladder_steps);
        s.analyzer.R = a.value("R", s.analyzer.R);
        s.analyzer.seed_c = a.value("seed_c", s.analyzer.seed_c);
        s.analyzer.polar_gap_tol = a.value("polar_gap_tol", s.analyzer.polar_gap_tol);
    }
    if (j.contains("pipeline")) s.pipeline = j["pipeline"].get<std::string>();
    if (j.contains("points")) {
        const auto& p = j["points"];
        s.point_count = p.value("count", s.point_count);
        s.point_margin = p.value("margin", s.point_margin);
    }
    if (j.contains("out")) s.out_dir = j["out"].get<std::string>();
    s.validate();
    return s;
}

std::string scenario_to_json(const Scenario& s) {
    json j;
    j["name"] = s.name;
    j["seed"] = s.seed;
    j["generator"] = {{"type", s.generator},
                      {"generation", s.cantor_generation},
                      {"lines", s.lines}};
    j["grid"] = {{"n", s.grid.n}, {"N", s.grid.N}, {"L", s.grid.L}};
    j["analyzer"] = {{"tau", s.analyzer.tau},
                     {"delta", s.analyzer.delta},
                     {"eps", s.analyzer.eps},
                     {"doubling_C", s.analyzer.doubling_C},
                     {"p", s.analyzer.p},
                     {"D", s.analyzer.D},
                     {"r0", s.analyzer.r0},
                     {"ladder_steps", s.analyzer.ladder_steps},
                     {"R", s.analyzer.R},
                     {"seed_c", s.analyzer.seed_c},
                     {"polar_gap_tol", s.analyzer.polar_gap_tol}};
    j["pipeline"] = s.pipeline;
    j["points"] = {{"count", s.point_count}, {"margin", s.point_margin}};
    j["out"] = s.out_dir;
    return j.dump(2);
}

namespace {

/// Middle-half Cantor set, generation g: 2^g intervals of length 4^{-g}.
IntervalUnion middle_half_cantor(int g) {
    std::vector<std::pair<double, double>> pieces{{0.0, 1.0}};
    for (int i = 0; i < g; ++i) {
        std::vector<std::pair<double, double>> next;
        for (auto [a, b] : pieces) {
            double len = (b - a) / 4.0;
            next.push_back({a, a + len});
            next.push_back({b - len, b});
        }
        pieces = std::move(next);
    }
    return IntervalUnion(std::move(pieces));
}

FragmentFamily fubini_family(const Grid& grid, int lines, bool horizontal) {
    FragmentFamily fam;
    fam.phi = LipschitzMap::identity(grid.n);
    double w = 1.0 / lines;
    for (int k = 0; k < lines; ++k) {
        double c = -0.5 + (k + 0.5) / lines;
        Vec start = horizontal ? vec(-0.5, c) : vec(c, -0.5);
        Vec vel = horizontal ? vec(1.0, 0.0) : vec(0.0, 1.0);
        FamilyEntry e;
        e.weight = w;
        e.fragment = Fragment::linear(grid.n, IntervalUnion::full(), start, vel, 0.0);
        e.profile = PiecewiseLinear::constant(1.0);
        fam.entries.push_back(std::move(e));
    }
    return fam;
}

FragmentFamily cantor_family(const Grid& grid, int g, bool horizontal) {
    FragmentFamily fam;
    fam.phi = LipschitzMap::identity(grid.n);
    IntervalUnion C = middle_half_cantor(g);
    const auto& rows = C.pieces();
    double w = 1.0 / (static_cast<double>(rows.size()) * C.measure());
    for (const auto& [a, b] : rows) {
        double c = 0.5 * (a + b) - 0.5;  // centered coordinates
        Vec start = horizontal ? vec(-0.5, c) : vec(c, -0.5);
        Vec vel = horizontal ? vec(1.0, 0.0) : vec(0.0, 1.0);
        FamilyEntry e;
        e.weight = w;
        e.fragment = Fragment::linear(grid.n, C, start, vel, 0.0);
        e.profile = PiecewiseLinear::constant(1.0);
        fam.entries.push_back(std::move(e));
    }
    return fam;
}

MatrixGridMeasure identity_companion(const ScalarGridMeasure& mu) {
    MatrixGridMeasure T(mu.grid);
    const int n = mu.grid.n;
    for (std::size_t c = 0; c < mu.grid.cells(); ++c)
        for (int i = 0; i < n; ++i) T.comp[c * n * n + i * n + i] = mu.mass[c];
    return T;
}

ScalarGridMeasure average(const ScalarGridMeasure& a, const ScalarGridMeasure& b) {
    ScalarGridMeasure out(a.grid);
    for (std::size_t c = 0; c < out.mass.size(); ++c)
        out.mass[c] = 0.5 * (a.mass[c] + b.mass[c]);
    return out;
}

ScalarGridMeasure annulus_measure(const Grid& grid, double rho, double width) {
    ScalarGridMeasure m(grid);
    double total = 0.0;
    for (std::size_t c = 0; c < grid.cells(); ++c) {
        double d = norm(grid.cell_center(c));
        if (std::abs(d - rho) <= width / 2.0) {
            m.mass[c] = 1.0;
            total += 1.0;
        }
    }
    if (total > 0.0)
        for (double& v : m.mass) v /= total;
    return m;
}

} // namespace

ScenarioData generate_scenario_data(const Scenario& s) {
    s.validate();
    ScenarioData data;
    const Grid& grid = s.grid;
    int lines = s.lines > 0 ? s.lines : 2 * grid.N;

    if (s.generator == "square-fubini") {
        data.families.push_back(fubini_family(grid, lines, true));
        data.families.push_back(fubini_family(grid, lines, false));
        data.directions = {vec(1, 0), vec(0, 1)};
        data.mu = average(disintegrate(data.families[0], grid),
                          disintegrate(data.families[1], grid));
        data.T = identity_companion(data.mu);
    } else if (s.generator == "four-corner-cantor" || s.generator == "cantor-fragments") {
        data.families.push_back(cantor_family(grid, s.cantor_generation, true));
        data.families.push_back(cantor_family(grid, s.cantor_generation, false));
        data.directions = {vec(1, 0), vec(0, 1)};
        data.mu = average(disintegrate(data.families[0], grid),
                          disintegrate(data.families[1], grid));
        data.T = identity_companion(data.mu);
    } else if (s.generator == "line-measure") {
        FragmentFamily fam;
        fam.phi = LipschitzMap::identity(grid.n);
        FamilyEntry e;
        e.fragment = Fragment::linear(grid.n, IntervalUnion::full(), vec(-0.5, 0.0),
                                      vec(1.0, 0.0), 0.0);
        fam.entries.push_back(std::move(e));
        data.families.push_back(fam);
        data.families.push_back(fam);  // degenerate second direction placeholder
        data.directions = {vec(1, 0), vec(0, 1)};
        data.mu = disintegrate(data.families[0], grid);
        data.T = identity_companion(data.mu);
    } else if (s.generator == "annulus") {
        data.mu = annulus_measure(grid, 0.375, 4.0 * grid.h());
        data.T = identity_companion(data.mu);
        data.families.push_back(fubini_family(grid, lines, true));
        data.families.push_back(fubini_family(grid, lines, false));
        data.directions = {vec(1, 0), vec(0, 1)};
    } else if (s.generator == "mixture") {
        auto fam_h = fubini_family(grid, lines, true);
        auto fam_v = fubini_family(grid, lines, false);
        ScalarGridMeasure leb = average(disintegrate(fam_h, grid), disintegrate(fam_v, grid));
        FragmentFamily line;
        line.phi = LipschitzMap::identity(grid.n);
        FamilyEntry e;
        e.fragment = Fragment::linear(grid.n, IntervalUnion::full(), vec(-0.5, 0.0),
                                      vec(1.0, 0.0), 0.0);
        line.entries.push_back(std::move(e));
        ScalarGridMeasure seg = disintegrate(line, grid);
        data.mu = ScalarGridMeasure(grid);
        for (std::size_t c = 0; c < grid.cells(); ++c)
            data.mu.mass[c] = leb.mass[c] + seg.mass[c];
        data.T = identity_companion(data.mu);
        data.families.push_back(std::move(fam_h));
        data.families.push_back(std::move(fam_v));
        data.directions = {vec(1, 0), vec(0, 1)};
    }
    return data;
}

std::vector<Vec> sample_scenario_points(const Scenario& s, const ScenarioData& data) {
    Rng rng(s.seed);
    std::vector<Vec> pts;
    if (s.generator == "four-corner-cantor" || s.generator == "cantor-fragments") {
        // occupied cells only
        std::vector<std::size_t> occupied;
        for (std::size_t c = 0; c < data.mu.mass.size(); ++c)
            if (data.mu.mass[c] > 0.0) occupied.push_back(c);
        if (occupied.empty()) throw input_error("cantor scenario produced an empty measure");
        for (int i = 0; i < s.point_count; ++i)
            pts.push_back(data.mu.grid.cell_center(
                occupied[static_cast<std::size_t>(rng.integer(occupied.size()))]));
    } else if (s.generator == "line-measure" || s.generator == "mixture") {
        for (int i = 0; i < s.point_count; ++i)
            pts.push_back(vec(rng.uniform(-0.5 + s.point_margin, 0.5 - s.point_margin), 0.0));
    } else {
        double m = s.point_margin;
        for (int i = 0; i < s.point_count; ++i)
            pts.push_back(vec(rng.uniform(-0.5 + m, 0.5 - m), rng.uniform(-0.5 + m, 0.5 - m)));
    }
    return pts;
}

namespace {

json certificate_to_json(const DensityCertificate& cert) {
    json j;
    j["x"] = {cert.x[0], cert.x[1], cert.x[2]};
    j["status"] = cert.status;
    j["seed_c"] = cert.seed_c;
    j["c_emp"] = cert.c_emp;
    json steps = json::array();
    for (const auto& st : cert.steps) {
        json sj;
        sj["r"] = st.r;
        sj["branch"] = to_string(st.branch);
        if (!st.failure.empty()) sj["failure"] = st.failure;
        sj["mu_r"] = st.mu_r;
        sj["mu_2r"] = st.mu_2r;
        sj["mu_3r"] = st.mu_3r;
        sj["nu_max_2r"] = st.nu_max_2r;
        sj["support_bound"] = st.support_bound;
        sj["chain_value"] = st.chain_value;
        steps.push_back(sj);
    }
    j["steps"] = steps;
    return j;
}

json norms_to_json(const NormReport& n) {
    json j;
    j["g_p"] = n.g_p;
    j["b_tv"] = n.b_tv;
    j["b_p"] = n.b_p;
    j["mu_tv"] = n.mu_tv;
    j["div_tv"] = n.div_tv;
    j["defect_tv"] = n.defect_tv;
    j["p"] = n.p;
    j["ratio_good"] = n.ratio_good;
    if (n.ratio_bad)
        j["ratio_bad"] = *n.ratio_bad;
    else
        j["ratio_bad"] = nullptr;
    return j;
}

json decomposition_to_json(const DecompositionResult& res) {
    json j;
    j["norms"] = norms_to_json(res.norms);
    j["radius"] = res.radius;
    j["center"] = {res.center[0], res.center[1], res.center[2]};
    json frame = json::array();
    for (int i = 0; i < res.frame.I.n; ++i) {
        json row = json::array();
        for (int k = 0; k < res.frame.I.n; ++k) row.push_back(res.frame.I(i, k));
        frame.push_back(row);
    }
    j["frame"] = {{"rows", frame}, {"inv_norm", res.frame.inv_norm}, {"det", res.frame.det}};
    j["grid"] = {{"n", res.grid.n}, {"N", res.grid.N}, {"L", res.grid.L}};
    j["fallback_zero_good"] = res.fallback_zero_good;
    return j;
}

struct CsvWriter {
    std::ostringstream os;
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os << ',';
            os << cells[i];
        }
        os << '\n';
    }
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

ScenarioOutcome run_scenario(const Scenario& s) {
    s.validate();
    fs::create_directories(s.out_dir);
    ScenarioData data = generate_scenario_data(s);
    std::vector<Vec> points = sample_scenario_points(s, data);

    json report;
    report["scenario"] = json::parse(scenario_to_json(s));
    report["defaults"] = {
        {"doubling_C", s.analyzer.effective_C(s.grid.n)},
        {"p", s.analyzer.effective_p(s.grid.n)},
        {"D", s.analyzer.effective_D(s.grid.n)},
        {"r0", s.analyzer.effective_r0(s.grid)},
        {"rung_R_at_r0", s.analyzer.rung_R(s.analyzer.effective_r0(s.grid))},
    };
    ScenarioOutcome outcome;

    if (s.pipeline == "decompose") {
        DecompositionRequest req;
        req.mu = data.mu;
        req.T = data.T;
        req.frame = FrameMatrix::identity(s.grid.n);
        req.p = s.analyzer.effective_p(s.grid.n);
        req.radius = 1.0;
        DecompositionResult res = decompose_divergence(req);
        report["decomposition"] = decomposition_to_json(res);
        write_grid_binary_file(s.out_dir + "/mu.grid", data.mu);
        write_grid_binary_file(s.out_dir + "/t.grid", data.T);
        write_grid_binary_file(s.out_dir + "/good.grid",
                               ScalarGridMeasure(res.grid, res.g));
        {
            // the bad part is signed; store magnitudes alongside the report
            std::vector<double> absb(res.b.size());
            for (std::size_t i = 0; i < res.b.size(); ++i) absb[i] = std::abs(res.b[i]);
            write_grid_binary_file(s.out_dir + "/bad_abs.grid",
                                   ScalarGridMeasure(res.grid, std::move(absb)));
        }
        outcome.summary = "decompose: ratio_good=" + fmt(res.norms.ratio_good);
    } else if (s.pipeline == "estimates") {
        std::ofstream(s.out_dir + "/family0.ndjson") << family_to_ndjson(data.families[0]);
        const double r_base = s.analyzer.effective_r0(s.grid);
        json rows = json::array();
        CsvWriter csv;
        csv.row({"x0", "x1", "r", "lhs1", "rhs1", "pass1", "lhs2", "rhs2", "pass2"});
        bool all_pass = true;
        int sweep = std::max(1, static_cast<int>(std::round(std::sqrt(s.point_count))));
        for (int i = 0; i < sweep; ++i) {
            Vec x = points[static_cast<std::size_t>(i) % points.size()];
            for (int k = 0; k < sweep; ++k) {
                CutoffSpec cut;
                cut.x = x;
                cut.r = r_base * (1.0 + k);
                double Reff = s.analyzer.rung_R(cut.r);
                EstimateReport rep =
                    localized_estimates(data.families[0], data.directions[0], s.grid, cut,
                                        s.analyzer.eps, s.analyzer.delta, Reff);
                all_pass = all_pass && rep.pass1 && rep.pass2;
                json rj;
                rj["x"] = {x[0], x[1]};
                rj["r"] = cut.r;
                rj["eps"] = rep.eps;
                rj["delta"] = rep.delta;
                rj["R"] = rep.R;
                rj["lhs1"] = rep.lhs1;
                rj["rhs1"] = rep.rhs1;
                rj["lhs2"] = rep.lhs2;
                rj["rhs2"] = rep.rhs2;
                rj["pass1"] = rep.pass1;
                rj["pass2"] = rep.pass2;
                rows.push_back(rj);
                csv.row({fmt(x[0]), fmt(x[1]), fmt(cut.r), fmt(rep.lhs1), fmt(rep.rhs1),
                         rep.pass1 ? "1" : "0", fmt(rep.lhs2), fmt(rep.rhs2),
                         rep.pass2 ? "1" : "0"});
            }
        }
        report["estimates"] = rows;
        report["all_pass"] = all_pass;
        std::ofstream(s.out_dir + "/estimates.csv") << csv.os.str();
        outcome.summary = std::string("estimates: ") + (all_pass ? "all pass" : "violations");
    } else if (s.pipeline == "certify") {
        DefectCache cache = build_defect_cache(data.families, s.grid, s.analyzer);
        std::vector<DensityCertificate> certs(points.size());
        unsigned workers = std::min<unsigned>(std::thread::hardware_concurrency(), 8u);
        if (workers < 1) workers = 1;
        std::vector<std::thread> pool;
        std::size_t chunk = (points.size() + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            std::size_t lo = w * chunk, hi = std::min(points.size(), lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([&, lo, hi] {
                for (std::size_t i = lo; i < hi; ++i)
                    certs[i] = scale_induction_certificate(data.mu, data.families, data.directions,
                                                           s.analyzer, points[i], &cache);
            });
        }
        for (auto& th : pool) th.join();

        json rows = json::array();
        CsvWriter csv;
        csv.row({"x0", "x1", "status", "seed_c", "c_emp"});
        int positive = 0, no_seed = 0, failures = 0;
        for (const auto& cert : certs) {
            rows.push_back(certificate_to_json(cert));
            csv.row({fmt(cert.x[0]), fmt(cert.x[1]), cert.status, fmt(cert.seed_c),
                     fmt(cert.c_emp)});
            if (cert.status == "positive")
                ++positive;
            else if (cert.status == "no-seed")
                ++no_seed;
            else
                ++failures;
        }
        report["certificates"] = rows;
        report["counts"] = {{"positive", positive}, {"no_seed", no_seed},
                            {"hypothesis_failures", failures}};
        std::ofstream(s.out_dir + "/certificates.csv") << csv.os.str();
        std::ostringstream sum;
        sum << "certify: " << positive << "/" << certs.size() << " positive, " << failures
            << " hypothesis failures";
        outcome.summary = sum.str();
    } else if (s.pipeline == "scan") {
        const double r_top = 0.25;
        std::vector<double> scales{r_top, r_top / 2, r_top / 4, r_top / 8};
        // coarse companion for the resolution-growth flag
        Scenario half = s;
        half.grid = Grid::centered(s.grid.n, std::max(8, s.grid.N / 2), s.grid.L);
        ScenarioData coarse = generate_scenario_data(half);

        json rows = json::array();
        CsvWriter csv;
        csv.row({"x0", "x1", "r", "b_ratio", "div_ratio", "defect_ratio", "polar_gap",
                 "outside_wave_cone", "div_ratio_coarse", "growth_flag"});
        int growth_flags = 0;
        for (const auto& x : points) {
            RatioScan fine = singular_ratio_scan(data.T, x, scales, s.analyzer);
            RatioScan rough = singular_ratio_scan(coarse.T, x, scales, s.analyzer);
            for (std::size_t i = 0; i < fine.rows.size(); ++i) {
                const auto& row = fine.rows[i];
                double coarse_ratio = i < rough.rows.size() ? rough.rows[i].div_ratio : 0.0;
                bool growth = coarse_ratio > 0.0 && row.div_ratio / coarse_ratio >= 1.4;
                if (i + 1 == fine.rows.size() && growth) ++growth_flags;
                json rj;
                rj["x"] = {x[0], x[1]};
                rj["r"] = row.r;
                rj["b_ratio"] = row.b_ratio;
                rj["div_ratio"] = row.div_ratio;
                rj["defect_ratio"] = row.defect_ratio;
                rj["polar_gap"] = row.polar_gap;
                rj["outside_wave_cone"] = row.outside_wave_cone;
                rj["skipped"] = row.skipped;
                rows.push_back(rj);
                csv.row({fmt(x[0]), fmt(x[1]), fmt(row.r), fmt(row.b_ratio), fmt(row.div_ratio),
                         fmt(row.defect_ratio), fmt(row.polar_gap),
                         row.outside_wave_cone ? "1" : "0", fmt(coarse_ratio),
                         growth ? "1" : "0"});
            }
        }
        report["scan"] = rows;
        report["growth_flags"] = growth_flags;
        std::ofstream(s.out_dir + "/scan.csv") << csv.os.str();
        std::ostringstream sum;
        sum << "scan: " << growth_flags << "/" << points.size() << " growth flags";
        outcome.summary = sum.str();
    }

    outcome.report_path = s.out_dir + "/report.json";
    std::ofstream(outcome.report_path) << report.dump(2) << '\n';
    std::ofstream(s.out_dir + "/summary.txt") << outcome.summary << '\n';
    return outcome;
}

std::string decomposition_report_json(const DecompositionResult& res) {
    return decomposition_to_json(res).dump(2);
}

} // namespace gmtlab
