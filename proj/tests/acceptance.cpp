// Acceptance suite: one pass/fail line per criterion, nonzero exit on failure.
// Criteria run at desk scale (n = 2) with pinned tolerances.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>
#include <vector>

#include "gmtlab/alberti.hpp"
#include "gmtlab/decompose.hpp"
#include "gmtlab/density.hpp"
#include "gmtlab/scenario.hpp"
#include "gmtlab/spectral.hpp"
#include "test_helpers.hpp"

using namespace gmtlab;
using namespace gmtlab::testing;

namespace {

int checks_failed = 0;

void expect(bool ok, const std::string& what) {
    if (!ok) {
        ++checks_failed;
        std::printf("      FAILED: %s\n", what.c_str());
    }
}

// ---------------------------------------------------------------- corpus ---

/// Fixed physical recipes rasterizable at any N so cross-resolution drift is
/// meaningful.
ScalarGridMeasure blob_measure(const Grid& g, std::uint64_t seed) {
    Rng rng(seed);
    PointMassList pts;
    for (int b = 0; b < 5; ++b)
        pts.push_back({vec(rng.uniform(-0.55, 0.55), rng.uniform(-0.55, 0.55)),
                       rng.uniform(0.2, 1.0), std::nullopt});
    return mollify(rasterize_scalar(pts, g), 0.18).out;
}

DecompositionRequest corpus_pair(const Grid& g, int which) {
    DecompositionRequest req;
    req.frame = FrameMatrix::identity(2);
    req.radius = 1.0;
    switch (which) {
        case 0: {  // perturbed blobs
            req.mu = blob_measure(g, 101);
            req.T = identity_companion(req.mu);
            auto w = blob_measure(g, 202);
            double mu_peak = 0.0, w_peak = 0.0;
            for (double v : req.mu.mass) mu_peak = std::max(mu_peak, v);
            for (double v : w.mass) w_peak = std::max(w_peak, v);
            for (std::size_t c = 0; c < g.cells(); ++c)
                req.T.comp[c * 4 + 1] += 0.3 * mu_peak * w.mass[c] / w_peak;
            break;
        }
        case 1: {  // Lebesgue ball, zero defect
            req.mu = indicator_ball(g, vec(0, 0), 0.5);
            req.T = identity_companion(req.mu);
            break;
        }
        default: {  // mollified line, resolved at every corpus resolution
            req.mu = mollify(line_measure(g), 0.25).out;
            req.T = identity_companion(req.mu);
            break;
        }
    }
    return req;
}

// ------------------------------------------------------------- criteria ---

bool criterion_1_exactness() {
    Grid g = Grid::centered(2, 128, 4.0);
    Rng rng(31415);
    for (int trial = 0; trial < 50; ++trial) {
        auto req = random_pair(g, rng, rng.uniform(0.0, 0.4));
        auto res = decompose_divergence(req);
        double mu_peak = 0.0;
        for (double v : req.mu.mass) mu_peak = std::max(mu_peak, v);
        for (std::size_t c = 0; c < g.cells(); ++c) {
            if (res.g[c] < 0.0) {
                expect(false, "negative good part");
                return false;
            }
            if (std::abs(res.g[c] + res.b[c] - req.mu.mass[c]) > 1e-10 * mu_peak) {
                expect(false, "g + b deviates from mu beyond 1e-10 relative");
                return false;
            }
        }
    }
    return checks_failed == 0;
}

bool criterion_2_zero_defect() {
    int before = checks_failed;
    Grid g = Grid::centered(2, 128, 4.0);
    // identity frame on three corpus measures
    for (int which : {0, 1, 2}) {
        auto req = corpus_pair(g, which);
        req.T = identity_companion(req.mu);
        auto res = decompose_divergence(req);
        expect(res.norms.b_tv <= 1e-8 * res.norms.mu_tv, "identity-frame bad part too large");
    }
    // non-identity frames through the scaled route
    for (double skew : {1.5, 2.0}) {
        Mat I = Mat::identity(2);
        I(1, 1) = skew;
        DecompositionRequest req;
        req.mu = indicator_ball(g, vec(0, 0), 0.5);
        req.T = frame_companion(req.mu, I);
        req.frame = FrameMatrix::from(I);
        req.radius = 1.0;
        auto res = scaled_decompose(req);
        expect(res.result.norms.b_tv <= 1e-8 * res.result.norms.mu_tv,
               "frame-scaled bad part too large");
    }
    return checks_failed == before;
}

bool criterion_3_stability() {
    int before = checks_failed;
    // measured ratios for the good/bad bounds across N in {64,128,256}
    for (int which : {0, 1, 2}) {
        double lo_g = 1e300, hi_g = 0.0, lo_b = 1e300, hi_b = 0.0;
        for (int N : {64, 128, 256}) {
            Grid g = Grid::centered(2, N, 4.0);
            auto res = decompose_divergence(corpus_pair(g, which));
            lo_g = std::min(lo_g, res.norms.ratio_good);
            hi_g = std::max(hi_g, res.norms.ratio_good);
            if (res.norms.ratio_bad) {
                lo_b = std::min(lo_b, *res.norms.ratio_bad);
                hi_b = std::max(hi_b, *res.norms.ratio_bad);
            }
        }
        std::printf("      corpus %d: ratio_good in [%.4g, %.4g]", which, lo_g, hi_g);
        if (hi_b > 0.0) std::printf(", ratio_bad in [%.4g, %.4g]", lo_b, hi_b);
        std::printf("\n");
        expect(hi_g < 2.0 * lo_g, "good-bound ratio drifts by a factor >= 2");
        if (hi_b > 0.0) expect(hi_b < 2.0 * lo_b, "bad-bound ratio drifts by a factor >= 2");
    }
    return checks_failed == before;
}

bool criterion_4_exact_constants() {
    int before = checks_failed;
    Rng rng(2718281);
    LipschitzMap id = LipschitzMap::identity(2);
    int done = 0, attempts = 0;
    while (done < 1000 && attempts < 20000) {
        ++attempts;
        ConeSpec cone;
        cone.e = vec(1, 0);
        cone.eps = rng.uniform(0.1, 0.6);
        cone.delta = rng.uniform(0.3, 1.0);
        Fragment g = random_cone_member(rng, cone.e, cone.eps, cone.delta, vec(0, 0));
        double r = rng.uniform(0.04, 0.15);
        auto good = density_good_set(g.domain(), cone.eps, r);
        if (good.empty()) continue;
        // t0 at a good point, x within 2r of gamma(t0)
        double t0 = good.inf();
        double ang = rng.uniform(0.0, 6.283185307179586);
        double rad = rng.uniform(0.0, 1.9 * r);
        Vec x = add(g.eval(t0), vec(rad * std::cos(ang), rad * std::sin(ang)));
        CutoffSpec cut;
        cut.x = x;
        cut.r = r;

        auto prof = extend_cutoff(g, cut, r / 8.0);
        if (prof.integral_abs_derivative() > 12.0 / cone.delta + 1e-9) {
            expect(false, "cutoff variation exceeds 12/delta");
            return false;
        }
        auto supp = prof.support();
        if (!supp.empty()) {
            double reach = 6.0 * r / cone.delta + 1e-9;
            if (supp.inf() < t0 - reach || supp.sup() > t0 + reach) {
                expect(false, "cutoff support escapes B(t0, 6r/delta)");
                return false;
            }
        }
        auto bm = fragment_ball_mass(g, id, cone, x, r, t0);
        if (!bm.bound_met) {
            expect(false, "fragment ball mass below 2(1-eps) delta r");
            return false;
        }
        ++done;
    }
    expect(done == 1000, "could not build 1000 admissible cone members");
    return checks_failed == before;
}

bool criterion_5_localized_estimates() {
    int before = checks_failed;
    Grid g = Grid::centered(2, 128, 2.0);
    Scenario sc;
    sc.grid = g;
    sc.generator = "square-fubini";
    auto data = generate_scenario_data(sc);
    const double eps = 0.45, delta = 1.0;
    const double xs[5] = {-0.12, -0.06, 0.0, 0.07, 0.13};
    const double rs[5] = {0.015, 0.025, 0.04, 0.055, 0.07};
    for (double x0 : xs)
        for (double r : rs) {
            CutoffSpec cut;
            cut.x = vec(x0, -x0 / 2);
            cut.r = r;
            auto rep = localized_estimates(data.families[0], data.directions[0], g, cut, eps,
                                           delta, 12.5 * r);
            expect(rep.pass1, "comparison inequality (constant 48) failed in the sweep");
            expect(rep.pass2, "variation inequality failed in the sweep");
        }
    return checks_failed == before;
}

bool criterion_6_support_soundness() {
    int before = checks_failed;
    Grid g = Grid::centered(2, 128, 4.0);
    for (int which : {0, 1, 2}) {
        auto req = corpus_pair(g, which);
        auto res = decompose_divergence(req);
        auto sb = support_lower_bound(res.norms.mu_tv, res.norms.b_tv, res.norms.g_p,
                                      res.norms.p);
        if (!sb.applicable) continue;
        double support_vol = 0.0;
        for (double v : req.mu.mass)
            if (v > 0.0) support_vol += g.cell_volume();
        std::printf("      corpus %d: bound %.4g <= support %.4g\n", which, sb.bound,
                    support_vol);
        expect(sb.bound <= support_vol, "support bound exceeds the true support volume");
    }
    return checks_failed == before;
}

bool criterion_7_square_vs_cantor() {
    int before = checks_failed;
    auto run = [&](const std::string& generator, std::uint64_t seed, const std::string& dir) {
        Scenario s;
        s.name = "acceptance-" + generator;
        s.generator = generator;
        s.cantor_generation = 5;
        s.grid = Grid::centered(2, 1024, 2.0);
        s.analyzer.ladder_steps = 3;
        s.analyzer.eps = 0.49;
        s.pipeline = "certify";
        s.point_count = 100;
        s.point_margin = 0.35;
        s.seed = seed;
        s.out_dir = dir;
        run_scenario(s);
        std::ifstream is(dir + "/report.json");
        nlohmann::json j = nlohmann::json::parse(is);
        return j.at("counts");
    };
    auto sq = run("square-fubini", 11, "/tmp/gmtlab_acc_square");
    auto ca = run("four-corner-cantor", 13, "/tmp/gmtlab_acc_cantor");
    int positive = sq.at("positive").get<int>();
    int failures = ca.at("hypothesis_failures").get<int>();
    std::printf("      square: %d/100 positive; cantor: %d/100 named failures\n", positive,
                failures);
    expect(positive >= 95, "fewer than 95 positive square certificates");
    expect(failures >= 95, "fewer than 95 named Cantor hypothesis failures");
    std::filesystem::remove_all("/tmp/gmtlab_acc_square");
    std::filesystem::remove_all("/tmp/gmtlab_acc_cantor");
    return checks_failed == before;
}

bool criterion_8_oracles() {
    int before = checks_failed;
    Rng rng(97);
    // Hausdorff distance vs an inline brute-force pairwise oracle
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<std::pair<double, double>> pa, pb;
        int na = 1 + static_cast<int>(rng.integer(7));
        int nb = 1 + static_cast<int>(rng.integer(7));
        for (int i = 0; i < na; ++i) {
            double t = rng.uniform();
            pa.push_back({t, t});
        }
        for (int i = 0; i < nb; ++i) {
            double t = rng.uniform();
            pb.push_back({t, t});
        }
        IntervalUnion A(pa), B(pb);
        double oracle = 0.0;
        auto directed = [](const IntervalUnion& X, const IntervalUnion& Y) {
            double worst = 0.0;
            for (const auto& [a, _] : X.pieces()) {
                double best = 1e300;
                for (const auto& [b, __] : Y.pieces()) best = std::min(best, std::abs(a - b));
                worst = std::max(worst, best);
            }
            return worst;
        };
        oracle = std::max(directed(A, B), directed(B, A));
        if (std::abs(hausdorff_distance(A, B) - oracle) > 1e-12) {
            expect(false, "Hausdorff distance deviates from the brute-force oracle");
            return false;
        }
    }
    // density good set vs the radius-scan oracle
    for (int trial = 0; trial < 200; ++trial) {
        auto K = random_domain(rng, 6);
        double eps = rng.uniform(0.05, 0.45);
        double R = rng.uniform(0.02, 0.3);
        auto G = density_good_set(K, eps, R);
        std::vector<double> probes;
        for (int i = 0; i < 40; ++i) probes.push_back(rng.uniform());
        for (double e : G.endpoints()) {
            probes.push_back(e + 1e-9);
            probes.push_back(e - 1e-9);
        }
        for (double t : probes) {
            if (!K.contains(t)) continue;
            if (density_good_at(K, eps, R, t, 10000) != G.contains(t)) {
                expect(false, "density good set deviates from the radius-scan oracle");
                return false;
            }
        }
    }
    // general-operator route vs the divergence decomposition
    {
        Grid g = Grid::centered(2, 128, 4.0);
        auto req = corpus_pair(g, 0);
        auto direct = decompose_divergence(req);
        auto general = decompose_general(divergence_symbol(2), vectorize(Mat::identity(2)), req);
        double scale = 0.0;
        for (double v : direct.g) scale = std::max(scale, std::abs(v));
        for (std::size_t c = 0; c < g.cells(); ++c) {
            if (std::abs(direct.g[c] - general.merged_g[c]) > 1e-6 * scale ||
                std::abs(direct.b[c] - general.merged_b[c]) > 1e-6 * scale) {
                expect(false, "general-operator route deviates beyond 1e-6");
                return false;
            }
        }
    }
    return checks_failed == before;
}

bool criterion_9_ratio_scan() {
    int before = checks_failed;
    AnalyzerConfig cfg;
    std::vector<double> scales{0.2, 0.1, 0.05, 0.025};

    // strictly decreasing divergence ratio for T = Id * Lebesgue
    {
        Scenario sc;
        sc.grid = Grid::centered(2, 128, 2.0);
        sc.generator = "square-fubini";
        auto data = generate_scenario_data(sc);
        Rng rng(55);
        int mono = 0;
        const int points = 20;
        for (int i = 0; i < points; ++i) {
            Vec x = vec(rng.uniform(-0.12, 0.12), rng.uniform(-0.12, 0.12));
            auto scan = singular_ratio_scan(data.T, x, scales, cfg);
            bool dec = true;
            for (std::size_t k = 1; k < scan.rows.size(); ++k)
                dec = dec && scan.rows[k].div_ratio < scan.rows[k - 1].div_ratio;
            if (dec) ++mono;
        }
        std::printf("      lebesgue: %d/%d strictly decreasing\n", mono, points);
        expect(mono >= points * 9 / 10, "divergence ratio fails to decrease at 90% of points");
    }
    // resolution-growth flag on the mixture's line points
    {
        Scenario s;
        s.name = "acceptance-mixture";
        s.generator = "mixture";
        s.grid = Grid::centered(2, 128, 2.0);
        s.pipeline = "scan";
        s.point_count = 20;
        s.seed = 7;
        s.out_dir = "/tmp/gmtlab_acc_scan";
        run_scenario(s);
        std::ifstream is("/tmp/gmtlab_acc_scan/report.json");
        nlohmann::json j = nlohmann::json::parse(is);
        int flags = j.at("growth_flags").get<int>();
        std::printf("      mixture: %d/%d growth flags\n", flags, s.point_count);
        expect(flags >= s.point_count * 9 / 10, "growth flag raised at fewer than 90% of points");
        std::filesystem::remove_all("/tmp/gmtlab_acc_scan");
    }
    return checks_failed == before;
}

bool criterion_10_weak_type() {
    int before = checks_failed;
    const double p = 4.0 / 3.0;
    double lo = 1e300, hi = 0.0;
    for (int N : {64, 128, 256}) {
        Grid g = Grid::centered(2, N, 4.0);
        Rng rng(4242);
        double c_emp = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            auto a = blob_measure(g, rng.fork());
            auto bfield = blob_measure(g, rng.fork());
            std::vector<double> b(g.cells());
            for (std::size_t c = 0; c < g.cells(); ++c) b[c] = a.mass[c] - bfield.mass[c];
            std::vector<double> absb(b.size()), bneg(b.size());
            for (std::size_t i = 0; i < b.size(); ++i) {
                absb[i] = std::abs(b[i]);
                bneg[i] = std::max(-b[i], 0.0);
            }
            double lhs = 0.0;
            for (std::size_t c = 0; c < g.cells(); ++c)
                if (norm(g.cell_center(c)) <= 1.0) lhs += absb[c];
            double weak = norms_of_cell_variation(g, absb, weak_l1_mode);
            double neg_p = norms_of_cell_variation(g, bneg, p);
            Fft fft(g);
            auto bh = fft.forward(b);
            double bh_inf = 0.0;
            for (auto& z : bh) bh_inf = std::max(bh_inf, std::abs(z) * g.cell_volume());
            double rhs = std::pow(weak, 1.0 - 1.0 / p) * std::pow(neg_p, 1.0 / p) + bh_inf;
            if (rhs > 0.0) c_emp = std::max(c_emp, lhs / rhs);
        }
        std::printf("      N=%d: C' = %.4g\n", N, c_emp);
        lo = std::min(lo, c_emp);
        hi = std::max(hi, c_emp);
    }
    expect(hi < 2.0 * lo, "weak-type constant drifts by a factor >= 2 across resolutions");
    return checks_failed == before;
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<bool()> run;
    };
    const std::vector<Criterion> criteria{
        {"decomposition exactness (50 random pairs, 1e-10, g >= 0)", criterion_1_exactness},
        {"zero-defect annihilation (||b|| <= 1e-8 ||mu||)", criterion_2_zero_defect},
        {"empirical-constant stability across N in {64,128,256}", criterion_3_stability},
        {"exact-constant lemmas on 1000 cone members", criterion_4_exact_constants},
        {"localized estimates on the Fubini 5x5 sweep (constant 48)",
         criterion_5_localized_estimates},
        {"support bound soundness against exact cell counts", criterion_6_support_soundness},
        {"square-vs-Cantor certificate separation (95%)", criterion_7_square_vs_cantor},
        {"oracle equivalences (Hausdorff, good sets, general operator)", criterion_8_oracles},
        {"singular ratio scan (decreasing ratios, growth flags)", criterion_9_ratio_scan},
        {"weak-type audit with a stable recorded constant", criterion_10_weak_type},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        checks_failed = 0;
        bool ok = false;
        try {
            ok = criteria[i].run();
        } catch (const std::exception& e) {
            std::printf("      exception: %s\n", e.what());
            ok = false;
        }
        std::printf("[%2zu] %s  %s\n", i + 1, ok ? "PASS" : "FAIL", criteria[i].name);
        if (!ok) ++failed;
    }
    std::printf("%d/%zu acceptance criteria passed\n", static_cast<int>(criteria.size()) - failed,
                criteria.size());
    return failed;
}
