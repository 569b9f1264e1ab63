#pragma once

#include <cstdint>
#include <vector>

#include "dinr/geometry.hpp"

namespace dinr {

enum class SamplingMode { EquiSpaced, Randomized };

/// One object-space quadrature point r_{i,j} = (t, z, y, x) and the length of the
/// generating ray inside the field of view.
struct CoordinateSample {
    double t = 0.0;
    double z = 0.0;
    double y = 0.0;
    double x = 0.0;
    double ray_chord = 0.0;
};

/// The sample set Phi_i for projection pixel i.
struct SampleSet {
    std::vector<CoordinateSample> samples;
    std::size_t pixel_index = 0;
    std::size_t view_index = 0;
    SamplingMode mode = SamplingMode::EquiSpaced;
};

/// Sample spacing along a ray, Delta / D, in mm.
double sample_spacing(const ScannerGeometry& geom, std::size_t d_factor);

/// Number of samples placed on a ray whose in-FOV chord is `chord`.
std::size_t samples_per_ray(double chord, double spacing);

/// Builds Phi_i for flat projection index i (view = i / N, pixel = i mod N).
SampleSet sample_pixel(const ScannerGeometry& geom, const ViewSchedule& schedule, std::size_t i,
                       std::size_t d_factor, SamplingMode mode, std::uint64_t seed);

/// Allocation-free variant: appends Phi_i to `out` and returns the number appended.
std::size_t sample_pixel_into(const ScannerGeometry& geom, const ViewSchedule& schedule, std::size_t i,
                              std::size_t d_factor, SamplingMode mode, std::uint64_t seed,
                              std::vector<CoordinateSample>& out);

/// w(r) = mu0 * l(r).
inline double weight(const CoordinateSample& sample, double mu0) { return mu0 * sample.ray_chord; }

}  // namespace dinr
