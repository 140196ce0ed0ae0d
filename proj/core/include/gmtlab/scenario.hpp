#pragma once

#include <string>
#include <vector>

#include "gmtlab/alberti.hpp"
#include "gmtlab/density.hpp"

namespace gmtlab {

/// Declarative experiment: a generator, grid, analyzer configuration, sample
/// points and a pipeline. Deterministic given the seed.
struct Scenario {
    std::string name = "scenario";
    std::uint64_t seed = 1;
    std::string generator = "square-fubini";  // | four-corner-cantor | cantor-fragments
                                              // | line-measure | annulus | mixture
    int cantor_generation = 5;
    int lines = 0;  // 0 -> 2N Fubini lines
    Grid grid = Grid::centered(2, 128, 4.0);
    AnalyzerConfig analyzer;
    std::string pipeline = "certify";  // | decompose | estimates | scan
    int point_count = 100;
    double point_margin = 0.35;  // sampling margin from the content boundary
    std::string out_dir = "out";

    void validate() const;
};

Scenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const Scenario& s);

/// Generated data for a scenario: the measure, its PDE companion and the
/// fragment families with their frame directions.
struct ScenarioData {
    ScalarGridMeasure mu;
    MatrixGridMeasure T;
    std::vector<FragmentFamily> families;
    std::vector<Vec> directions;
};

ScenarioData generate_scenario_data(const Scenario& s);

/// Sample points appropriate to the generator (interior box points, occupied
/// Cantor cells, points on the line), deterministic in the seed.
std::vector<Vec> sample_scenario_points(const Scenario& s, const ScenarioData& data);

struct ScenarioOutcome {
    int exit_code = 0;       // nonzero only for faults
    std::string report_path; // main JSON report
    std::string summary;     // one-line human-readable outcome
};

/// Generates data, runs the requested pipeline and writes JSON/CSV artifacts
/// plus a human-readable summary under the output directory. Hypothesis
/// failures are successful runs with failure-valued reports.
ScenarioOutcome run_scenario(const Scenario& s);

/// Decomposition result as a JSON document: norms, empirical ratios, p, the
/// support ball, the frame and the grid metadata.
std::string decomposition_report_json(const DecompositionResult& res);

} // namespace gmtlab
