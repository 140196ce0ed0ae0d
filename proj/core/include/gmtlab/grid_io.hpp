#pragma once

#include <iosfwd>
#include <string>
#include <variant>

#include "gmtlab/grid.hpp"

namespace gmtlab {

using AnyGridMeasure = std::variant<ScalarGridMeasure, VectorGridMeasure, MatrixGridMeasure>;

// Grid binary format: 16-byte magic "GMTLABGRIDv1" + 4 NULs, then a UTF-8
// JSON header {n, N, L, origin, kind} terminated by '\n', then the cell
// values as row-major 64-bit IEEE-754 little-endian doubles (components
// within a cell contiguous, matrix entries row-major).

void write_grid_binary(std::ostream& os, const ScalarGridMeasure& m);
void write_grid_binary(std::ostream& os, const VectorGridMeasure& m);
void write_grid_binary(std::ostream& os, const MatrixGridMeasure& m);

void write_grid_binary_file(const std::string& path, const AnyGridMeasure& m);

AnyGridMeasure read_grid_binary(std::istream& is);
AnyGridMeasure read_grid_binary_file(const std::string& path);

} // namespace gmtlab
