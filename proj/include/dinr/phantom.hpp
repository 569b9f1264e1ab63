#pragma once

#include <string>
#include <vector>

#include "dinr/geometry.hpp"
#include "dinr/sampler.hpp"

namespace dinr {

/// Uniform ellipsoid whose center translates and whose semi-axes change linearly in time.
struct MovingEllipsoid {
    Vec3 center0;
    Vec3 velocity;
    Vec3 semi_axes0{1.0, 1.0, 1.0};
    Vec3 axes_rate;
    double value = 0.0;

    Vec3 center(double t) const { return center0 + t * velocity; }
    Vec3 semi_axes(double t) const { return semi_axes0 + t * axes_rate; }
    bool contains(Vec3 p, double t) const;
    /// Length of the segment src->dst inside the ellipsoid at time t.
    double chord(Vec3 src, Vec3 dst, double t) const;
};

/// Time-varying attenuation field built from additive ellipsoids.
struct DynamicPhantom {
    std::vector<MovingEllipsoid> primitives;
    double background = 0.0;

    /// Checks positivity and that every primitive stays inside the FOV cylinder
    /// with positive semi-axes over the schedule's time span.
    void validate(const ScannerGeometry& geom, const ViewSchedule& schedule) const;
};

double mu_at(const DynamicPhantom& ph, const CoordinateSample& r);

/// Exact projection along src->dst at time t. The background only counts inside
/// the FOV cylinder (x_s0, r), matching the zero-outside-FOV assumption.
double line_integral_exact(const DynamicPhantom& ph, Vec3 src, Vec3 dst, double t, double x_s0 = 0.0,
                           double fov_radius = 0.0);

/// Bundled scenarios, scaled to the field of view.
/// "static-disk": one static sphere of radius 0.5 r and value mu.
/// "compress": one sphere whose z semi-axis shrinks linearly to 60% over `duration`.
DynamicPhantom static_disk_phantom(const ScannerGeometry& geom, double value = 0.05);
DynamicPhantom compress_phantom(const ScannerGeometry& geom, double duration, double value = 0.05);
DynamicPhantom named_phantom(const std::string& name, const ScannerGeometry& geom, double duration);

}  // namespace dinr
