#pragma once

#include <complex>
#include <vector>

#include "gmtlab/grid.hpp"

namespace gmtlab {

/// n-dimensional complex FFT over the grid's torus, Fourier convention
/// e^{-2*pi*i*<x,xi>} so d/dx_j maps to 2*pi*i*xi_j with xi = k/L.
/// Buffers are invocation-local; instances are cheap and not shared.
class Fft {
  public:
    explicit Fft(const Grid& grid);

    std::vector<std::complex<double>> forward(const std::vector<double>& cells) const;
    std::vector<double> inverse(const std::vector<std::complex<double>>& spec) const;

    /// Physical frequency vector xi = k/L for the flat spectral index.
    Vec frequency(std::size_t flat) const;

    const Grid& grid() const { return grid_; }

  private:
    Grid grid_;
};

/// Spectrally computed distributional divergence of a matrix measure,
/// row-wise: (Div T)_i = sum_j d_j T_ij. Exact for band-limited data;
/// on singular (curve-concentrated) data its total variation grows with N,
/// which downstream ratio scans use as a singularity flag.
VectorGridMeasure divergence_spectral(const MatrixGridMeasure& T);

/// Centered-difference divergence for cross-validation of the spectral path.
VectorGridMeasure divergence_centered(const MatrixGridMeasure& T);

/// Divergence of a vector measure (scalar result field, signed cell values).
std::vector<double> divergence_spectral(const VectorGridMeasure& V);

} // namespace gmtlab
