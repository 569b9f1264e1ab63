#include "dinr/phantom.hpp"

#include <algorithm>
#include <cmath>

namespace dinr {

bool MovingEllipsoid::contains(Vec3 p, double t) const
{
    const Vec3 c = center(t);
    const Vec3 a = semi_axes(t);
    const double qx = (p.x - c.x) / a.x;
    const double qy = (p.y - c.y) / a.y;
    const double qz = (p.z - c.z) / a.z;
    return qx * qx + qy * qy + qz * qz <= 1.0;
}

double MovingEllipsoid::chord(Vec3 src, Vec3 dst, double t) const
{
    const Vec3 c = center(t);
    const Vec3 a = semi_axes(t);
    const Vec3 d = dst - src;
    const Vec3 e = src - c;
    // Scale to the unit sphere, then intersect |e' + delta d'|^2 = 1.
    const double dx = d.x / a.x, dy = d.y / a.y, dz = d.z / a.z;
    const double ex = e.x / a.x, ey = e.y / a.y, ez = e.z / a.z;
    const double qa = dx * dx + dy * dy + dz * dz;
    const double qb = 2.0 * (ex * dx + ey * dy + ez * dz);
    const double qc = ex * ex + ey * ey + ez * ez - 1.0;
    if (qa == 0.0) return 0.0;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc <= 0.0) return 0.0;
    const double sq = std::sqrt(disc);
    const double lo = std::max((-qb - sq) / (2.0 * qa), 0.0);
    const double hi = std::min((-qb + sq) / (2.0 * qa), 1.0);
    if (hi <= lo) return 0.0;
    return (hi - lo) * norm(d);
}

void DynamicPhantom::validate(const ScannerGeometry& geom, const ViewSchedule& schedule) const
{
    if (background < 0.0) throw GeometryError("phantom background must be >= 0");
    const double t0 = schedule.times.front();
    const double t1 = schedule.times.back();
    for (std::size_t k = 0; k < primitives.size(); ++k) {
        const auto& e = primitives[k];
        const std::string tag = "phantom primitive " + std::to_string(k);
        if (e.value < 0.0) throw GeometryError(tag + ": value must be >= 0");
        // Center and semi-axes are affine in t, so the endpoints bound the motion.
        for (double t : {t0, t1}) {
            const Vec3 a = e.semi_axes(t);
            if (!(a.x > 0.0 && a.y > 0.0 && a.z > 0.0))
                throw GeometryError(tag + ": semi-axes must stay > 0 over the schedule");
            const Vec3 c = e.center(t);
            const double reach = std::hypot(c.x - geom.rot_center_x, c.y) + std::max(a.x, a.y);
            if (reach > geom.fov_radius * (1.0 + 1e-12))
                throw GeometryError(tag + ": leaves the field-of-view cylinder");
        }
    }
}

double mu_at(const DynamicPhantom& ph, const CoordinateSample& r)
{
    double mu = ph.background;
    const Vec3 p{r.x, r.y, r.z};
    for (const auto& e : ph.primitives)
        if (e.contains(p, r.t)) mu += e.value;
    return mu;
}

double line_integral_exact(const DynamicPhantom& ph, Vec3 src, Vec3 dst, double t, double x_s0,
                           double fov_radius)
{
    double sum = 0.0;
    for (const auto& e : ph.primitives) sum += e.value * e.chord(src, dst, t);
    if (ph.background != 0.0 && fov_radius > 0.0) {
        if (auto b = fov_delta_bounds({src.x, src.y}, {dst.x, dst.y}, x_s0, fov_radius))
            sum += ph.background * (b->hi - b->lo) * norm(dst - src);
    }
    return sum;
}

DynamicPhantom static_disk_phantom(const ScannerGeometry& geom, double value)
{
    const double r = geom.fov_radius;
    MovingEllipsoid sphere;
    sphere.center0 = {geom.rot_center_x, 0.0, 0.0};
    sphere.semi_axes0 = {0.5 * r, 0.5 * r, 0.5 * r};
    sphere.value = value;
    return {{sphere}, 0.0};
}

DynamicPhantom compress_phantom(const ScannerGeometry& geom, double duration, double value)
{
    const double r = geom.fov_radius;
    MovingEllipsoid sphere;
    sphere.center0 = {geom.rot_center_x, 0.0, 0.0};
    sphere.semi_axes0 = {0.5 * r, 0.5 * r, 0.5 * r};
    if (duration > 0.0) sphere.axes_rate = {0.0, 0.0, -0.2 * r / duration};
    sphere.value = value;
    return {{sphere}, 0.0};
}

DynamicPhantom named_phantom(const std::string& name, const ScannerGeometry& geom, double duration)
{
    if (name == "static-disk") return static_disk_phantom(geom);
    if (name == "compress") return compress_phantom(geom, duration);
    throw GeometryError("unknown phantom '" + name + "'");
}

}  // namespace dinr
