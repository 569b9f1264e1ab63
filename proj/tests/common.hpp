#pragma once

#include <cmath>
#include <numbers>

#include "dinr/geometry.hpp"
#include "dinr/network.hpp"

namespace dinr::test {

/// Square detector exactly spanning the FOV diameter, centered on the axis.
inline ScannerGeometry parallel_geometry(std::size_t n, double radius, double x_s0 = 0.0)
{
    ScannerGeometry g;
    g.beam = BeamType::Parallel;
    g.sod = 4.0 * radius;
    g.odd = 2.0 * radius;
    g.n_rows = n;
    g.n_cols = n;
    g.pixel_dx = 2.0 * radius / static_cast<double>(n);
    g.pixel_dz = g.pixel_dx;
    g.offset_cx = radius - x_s0;
    g.offset_cz = radius;
    g.fov_radius = radius;
    g.rot_center_x = x_s0;
    return g;
}

inline ScannerGeometry cone_geometry(std::size_t n, double radius)
{
    ScannerGeometry g;
    g.beam = BeamType::Cone;
    g.sod = 5.0 * radius;
    g.odd = 5.0 * radius;
    g.n_rows = n;
    g.n_cols = n;
    // Detector wide enough to see the whole FOV at magnification 2.
    g.pixel_dx = 2.4 * 2.0 * radius / static_cast<double>(n);
    g.pixel_dz = g.pixel_dx;
    g.offset_cx = 0.5 * static_cast<double>(n) * g.pixel_dx;
    g.offset_cz = g.offset_cx;
    g.fov_radius = radius;
    return g;
}

inline ViewSchedule half_turn(std::size_t views, double dt = 1.0)
{
    return ViewSchedule::uniform(views, std::numbers::pi, dt);
}

inline double rel_err(double a, double b, double floor = 1e-12)
{
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace dinr::test
