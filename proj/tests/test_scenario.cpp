#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gmtlab/scenario.hpp"

using namespace gmtlab;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

} // namespace

TEST_CASE("scenario json round trip and validation") {
    Scenario s;
    s.name = "roundtrip";
    s.seed = 42;
    s.generator = "four-corner-cantor";
    s.cantor_generation = 4;
    s.grid = Grid::centered(2, 64, 2.0);
    s.pipeline = "scan";
    Scenario back = scenario_from_json(scenario_to_json(s));
    CHECK(back.name == s.name);
    CHECK(back.seed == s.seed);
    CHECK(back.generator == s.generator);
    CHECK(back.cantor_generation == s.cantor_generation);
    CHECK(back.grid == s.grid);
    CHECK(back.pipeline == s.pipeline);

    CHECK_THROWS_AS(scenario_from_json("{\"generator\": \"bogus\"}"), parameter_error);
    CHECK_THROWS_AS(scenario_from_json("{\"pipeline\": \"frobnicate\"}"), parameter_error);
    CHECK_THROWS_AS(scenario_from_json("{\"generator\": {\"type\": \"four-corner-cantor\","
                                       "\"generation\": 9}}"),
                    parameter_error);
}

TEST_CASE("generators produce the documented measures") {
    Scenario s;
    s.grid = Grid::centered(2, 64, 2.0);

    SUBCASE("square-fubini approximates Lebesgue with unit mass") {
        s.generator = "square-fubini";
        auto data = generate_scenario_data(s);
        CHECK(data.mu.total_variation() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(data.families.size() == 2);
        CHECK(data.T.total_variation() ==
              doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
    }
    SUBCASE("four-corner-cantor concentrates on the product set") {
        s.generator = "four-corner-cantor";
        s.cantor_generation = 3;
        auto data = generate_scenario_data(s);
        CHECK(data.mu.total_variation() == doctest::Approx(1.0).epsilon(1e-9));
        // mass only where both coordinates lie in the Cantor slabs
        int occupied = 0;
        for (double v : data.mu.mass)
            if (v > 0) ++occupied;
        CHECK(occupied > 0);
        CHECK(occupied < static_cast<int>(0.3 * data.mu.grid.cells()));
    }
    SUBCASE("line measure carries unit length") {
        s.generator = "line-measure";
        auto data = generate_scenario_data(s);
        CHECK(data.mu.total_variation() == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("mixture stacks Lebesgue and the line") {
        s.generator = "mixture";
        auto data = generate_scenario_data(s);
        CHECK(data.mu.total_variation() == doctest::Approx(2.0).epsilon(1e-9));
    }
}

TEST_CASE("scenario runs are deterministic byte-for-byte") {
    Scenario s;
    s.name = "determinism";
    s.seed = 2718;
    s.generator = "mixture";
    s.grid = Grid::centered(2, 64, 2.0);
    s.pipeline = "scan";
    s.point_count = 5;
    s.out_dir = "/tmp/gmtlab_det";
    auto a = run_scenario(s);
    CHECK(a.exit_code == 0);
    std::string report_first = slurp(a.report_path);
    std::string csv_first = slurp("/tmp/gmtlab_det/scan.csv");
    auto b = run_scenario(s);  // identical scenario, rerun over the same output
    CHECK(report_first == slurp(b.report_path));
    CHECK(csv_first == slurp("/tmp/gmtlab_det/scan.csv"));
    std::filesystem::remove_all("/tmp/gmtlab_det");
}

TEST_CASE("decompose pipeline writes artifacts and defaults") {
    Scenario s;
    s.name = "artifacts";
    s.generator = "square-fubini";
    s.grid = Grid::centered(2, 64, 4.0);
    s.pipeline = "decompose";
    s.out_dir = "/tmp/gmtlab_art";
    auto outcome = run_scenario(s);
    CHECK(outcome.exit_code == 0);
    std::string report = slurp(outcome.report_path);
    CHECK(report.find("\"defaults\"") != std::string::npos);
    CHECK(report.find("\"ratio_good\"") != std::string::npos);
    CHECK(std::filesystem::exists("/tmp/gmtlab_art/good.grid"));
    std::filesystem::remove_all("/tmp/gmtlab_art");
}
