#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

namespace dinr {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
double norm(Vec3 a);

/// Thrown for malformed inputs to geometry routines (bad indices, degenerate rays,
/// inconsistent scanner parameters).
class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class BeamType { Parallel, Cone };

/// Source/detector placement. The optical axis runs along +y, the object rotates
/// about the z axis through (rot_center_x, 0). Lengths in mm.
struct ScannerGeometry {
    BeamType beam = BeamType::Parallel;
    double sod = 100.0;   // |y_s|
    double odd = 0.0;     // |y_d|
    std::size_t n_rows = 1;
    std::size_t n_cols = 1;
    double pixel_dx = 1.0;
    double pixel_dz = 1.0;
    double offset_cx = 0.0;  // optical axis to left detector edge
    double offset_cz = 0.0;  // optical axis to bottom detector edge
    double fov_radius = 1.0;
    double rot_center_x = 0.0;

    void validate() const;
    std::size_t pixels_per_view() const { return n_rows * n_cols; }
    double magnification() const;
    /// Detector pitch back-projected to the rotation axis.
    double object_pixel_size() const { return pixel_dx / magnification(); }
};

/// Per-view rotation angle (radians) and acquisition time (seconds).
struct ViewSchedule {
    std::vector<double> angles;
    std::vector<double> times;

    std::size_t size() const { return angles.size(); }
    void validate() const;

    /// Views k = 0..n-1 at angle k*total/n and time k*dt.
    static ViewSchedule uniform(std::size_t n_views, double total_angle_rad, double time_per_view_s);
};

/// The detector surface C_{i,j} covered by pixel (i, j): [x_lo, x_hi) x [z_lo, z_hi).
struct DetectorPixelRegion {
    double x_lo = 0.0;
    double x_hi = 0.0;
    double z_lo = 0.0;
    double z_hi = 0.0;
};

struct DeltaBounds {
    double lo = 0.0;
    double hi = 0.0;
};

/// A source-to-detector segment parameterized by delta in [0, 1]. `hits` is false
/// when the segment misses the field of view; delta bounds are then zero.
struct Ray {
    Vec3 src;
    Vec3 dst;
    double delta_min = 0.0;
    double delta_max = 0.0;
    bool hits = false;

    Vec3 at(double delta) const { return src + delta * (dst - src); }
    double length() const { return norm(dst - src); }
    /// Length of the segment inside the cylindrical field of view.
    double chord() const { return hits ? (delta_max - delta_min) * length() : 0.0; }
};

DetectorPixelRegion pixel_region(const ScannerGeometry& geom, std::size_t i, std::size_t j);

/// Anti-clockwise rotation by theta in the x-y plane about (x_s0, 0).
Vec2 rotate_point(Vec2 p, double theta, double x_s0);

/// Delta range of the segment src->dst that lies inside the cylinder
/// (x - x_s0)^2 + y^2 <= r^2, clamped to [0, 1]. Empty when the segment misses.
std::optional<DeltaBounds> fov_delta_bounds(Vec2 src, Vec2 dst, double x_s0, double r);

/// Ray from the source to the center of sub-pixel (u, v) of a D x D subdivision,
/// at zero rotation.
Ray ray_for_subpixel(const ScannerGeometry& geom, const DetectorPixelRegion& region, std::size_t u,
                     std::size_t v, std::size_t d_factor);

/// Rotate the x-y components of a point by theta about (x_s0, 0), keeping z.
Vec3 rotate_xy(Vec3 p, double theta, double x_s0);

}  // namespace dinr
