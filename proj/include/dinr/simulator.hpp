#pragma once

#include <cstdint>
#include <vector>

#include "dinr/geometry.hpp"
#include "dinr/phantom.hpp"

namespace dinr {

/// Measured projections p_i = -log(lambda_i / lambda_bar_i), stored view-major with
/// detector column fastest: values[m * N + j * n_cols + i].
struct ProjectionSet {
    std::vector<double> values;
    ScannerGeometry geometry;
    ViewSchedule schedule;
    double blank_intensity = 1.0;

    std::size_t n_views() const { return schedule.size(); }
    std::size_t pixels_per_view() const { return geometry.pixels_per_view(); }
    std::size_t size() const { return values.size(); }
    void validate() const;
};

/// Lower clamp on noisy transmission before taking the log.
inline constexpr double kTransmissionFloor = 1e-8;

/// Noiseless pixel-averaged projection for view m and detector pixel n (mean over
/// the D x D sub-rays of the exact line integral, object frozen at t_m).
double exact_pixel_projection(const DynamicPhantom& ph, const ScannerGeometry& geom, const ViewSchedule& schedule,
                              std::size_t view, std::size_t pixel, std::size_t d_factor);

/// Applies transmission-space Gaussian noise with std noise_frac * sqrt(T).
double noisy_projection(double p_clean, double noise_frac, std::uint64_t seed, std::size_t view, std::size_t pixel);

/// Simulates all views; OpenMP-parallel over pixels, result independent of thread count.
ProjectionSet simulate(const DynamicPhantom& ph, const ScannerGeometry& geom, const ViewSchedule& schedule,
                       std::size_t d_factor, double noise_frac, std::uint64_t seed);

}  // namespace dinr
