#include "dinr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dinr {

double norm(Vec3 a) { return std::sqrt(a.x * a.x + a.y * a.y + a.z * a.z); }

void ScannerGeometry::validate() const
{
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw GeometryError("invalid geometry: " + what);
    };
    require(sod > 0.0, "sod must be > 0");
    require(odd >= 0.0, "odd must be >= 0");
    require(n_rows >= 1 && n_cols >= 1, "detector must have at least one row and column");
    require(pixel_dx > 0.0 && pixel_dz > 0.0, "pixel pitch must be > 0");
    require(fov_radius > 0.0, "fov_radius must be > 0");
    // Source and detector planes both sit outside the FOV cylinder so that
    // delta in [0, 1] covers every chord through the object.
    require(fov_radius < sod, "fov_radius must be < sod (source outside the field of view)");
    require(fov_radius <= odd, "fov_radius must be <= odd (detector outside the field of view)");
    require(std::isfinite(offset_cx) && std::isfinite(offset_cz) && std::isfinite(rot_center_x),
            "offsets must be finite");
}

double ScannerGeometry::magnification() const
{
    return beam == BeamType::Cone ? (sod + odd) / sod : 1.0;
}

void ViewSchedule::validate() const
{
    if (angles.empty()) throw GeometryError("view schedule is empty");
    if (angles.size() != times.size())
        throw GeometryError("view schedule: angles and times differ in length");
    for (std::size_t k = 0; k < angles.size(); ++k) {
        if (!std::isfinite(angles[k]) || !std::isfinite(times[k]))
            throw GeometryError("view schedule: non-finite entry at view " + std::to_string(k));
        if (k > 0 && !(times[k] > times[k - 1]))
            throw GeometryError("view schedule: times must be strictly increasing");
    }
}

ViewSchedule ViewSchedule::uniform(std::size_t n_views, double total_angle_rad, double time_per_view_s)
{
    ViewSchedule s;
    s.angles.resize(n_views);
    s.times.resize(n_views);
    for (std::size_t k = 0; k < n_views; ++k) {
        s.angles[k] = total_angle_rad * static_cast<double>(k) / static_cast<double>(n_views);
        s.times[k] = time_per_view_s * static_cast<double>(k);
    }
    return s;
}

DetectorPixelRegion pixel_region(const ScannerGeometry& geom, std::size_t i, std::size_t j)
{
    if (i >= geom.n_cols || j >= geom.n_rows)
        throw GeometryError("pixel index (" + std::to_string(i) + ", " + std::to_string(j) +
                            ") outside detector " + std::to_string(geom.n_cols) + "x" +
                            std::to_string(geom.n_rows));
    const double x0 = -geom.offset_cx + static_cast<double>(i) * geom.pixel_dx;
    const double z0 = -geom.offset_cz + static_cast<double>(j) * geom.pixel_dz;
    return {x0, x0 + geom.pixel_dx, z0, z0 + geom.pixel_dz};
}

Vec2 rotate_point(Vec2 p, double theta, double x_s0)
{
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {p.x * c - p.y * s + x_s0 * (1.0 - c), p.x * s + p.y * c - x_s0 * s};
}

Vec3 rotate_xy(Vec3 p, double theta, double x_s0)
{
    const Vec2 q = rotate_point({p.x, p.y}, theta, x_s0);
    return {q.x, q.y, p.z};
}

std::optional<DeltaBounds> fov_delta_bounds(Vec2 src, Vec2 dst, double x_s0, double r)
{
    const double dx = dst.x - src.x;
    const double dy = dst.y - src.y;
    const double ex = src.x - x_s0;
    const double a = dx * dx + dy * dy;
    const double b = 2.0 * (ex * dx + src.y * dy);
    const double c = ex * ex + src.y * src.y - r * r;

    if (a == 0.0) {
        // Axial ray: either fully inside the cylinder or not a usable ray.
        if (c <= 0.0) return DeltaBounds{0.0, 1.0};
        throw GeometryError("degenerate ray: source and detector coincide in the x-y plane");
    }
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    double lo = (-b - sq) / (2.0 * a);
    double hi = (-b + sq) / (2.0 * a);
    lo = std::clamp(lo, 0.0, 1.0);
    hi = std::clamp(hi, 0.0, 1.0);
    if (hi < lo) return std::nullopt;
    // Clamping can only collapse the interval when the cylinder lies entirely
    // before the source or beyond the detector.
    if (hi == lo && (lo == 0.0 || lo == 1.0) && disc > 0.0) return std::nullopt;
    return DeltaBounds{lo, hi};
}

Ray ray_for_subpixel(const ScannerGeometry& geom, const DetectorPixelRegion& region, std::size_t u,
                     std::size_t v, std::size_t d_factor)
{
    if (d_factor == 0 || u >= d_factor || v >= d_factor)
        throw GeometryError("sub-pixel index outside the D x D grid");
    const double fd = static_cast<double>(d_factor);
    Ray ray;
    ray.dst = {region.x_lo + (static_cast<double>(u) + 0.5) * (region.x_hi - region.x_lo) / fd, geom.odd,
               region.z_lo + (static_cast<double>(v) + 0.5) * (region.z_hi - region.z_lo) / fd};
    if (geom.beam == BeamType::Cone)
        ray.src = {0.0, -geom.sod, 0.0};
    else
        ray.src = {ray.dst.x, -geom.sod, ray.dst.z};

    const auto bounds = fov_delta_bounds({ray.src.x, ray.src.y}, {ray.dst.x, ray.dst.y}, geom.rot_center_x,
                                         geom.fov_radius);
    if (bounds) {
        ray.delta_min = bounds->lo;
        ray.delta_max = bounds->hi;
        ray.hits = true;
    }
    return ray;
}

}  // namespace dinr
