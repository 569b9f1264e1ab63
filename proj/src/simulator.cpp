#include "dinr/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "dinr/rng.hpp"

namespace dinr {

void ProjectionSet::validate() const
{
    geometry.validate();
    schedule.validate();
    if (values.size() != n_views() * pixels_per_view())
        throw GeometryError("projection set: " + std::to_string(values.size()) + " values, expected " +
                            std::to_string(n_views() * pixels_per_view()));
    if (!(blank_intensity > 0.0)) throw GeometryError("projection set: blank intensity must be > 0");
    for (double v : values)
        if (!std::isfinite(v)) throw GeometryError("projection set: non-finite value");
}

double exact_pixel_projection(const DynamicPhantom& ph, const ScannerGeometry& geom, const ViewSchedule& schedule,
                              std::size_t view, std::size_t pixel, std::size_t d_factor)
{
    const double theta = schedule.angles[view];
    const double t = schedule.times[view];
    const DetectorPixelRegion region = pixel_region(geom, pixel % geom.n_cols, pixel / geom.n_cols);
    double sum = 0.0;
    for (std::size_t v = 0; v < d_factor; ++v) {
        for (std::size_t u = 0; u < d_factor; ++u) {
            const Ray ray = ray_for_subpixel(geom, region, u, v, d_factor);
            const Vec3 src = rotate_xy(ray.src, -theta, geom.rot_center_x);
            const Vec3 dst = rotate_xy(ray.dst, -theta, geom.rot_center_x);
            sum += line_integral_exact(ph, src, dst, t, geom.rot_center_x, geom.fov_radius);
        }
    }
    return sum / static_cast<double>(d_factor * d_factor);
}

double noisy_projection(double p_clean, double noise_frac, std::uint64_t seed, std::size_t view, std::size_t pixel)
{
    if (noise_frac == 0.0) return p_clean;
    Stream stream = make_stream(seed, {seed_tag::noise, view, pixel});
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double transmission = std::exp(-p_clean);
    const double noisy = std::max(transmission + noise_frac * std::sqrt(transmission) * gauss(stream),
                                  kTransmissionFloor);
    return -std::log(noisy);
}

ProjectionSet simulate(const DynamicPhantom& ph, const ScannerGeometry& geom, const ViewSchedule& schedule,
                       std::size_t d_factor, double noise_frac, std::uint64_t seed)
{
    geom.validate();
    schedule.validate();
    if (noise_frac < 0.0) throw GeometryError("noise_frac must be >= 0");
    if (d_factor == 0) throw GeometryError("d_factor must be >= 1");

    ProjectionSet out;
    out.geometry = geom;
    out.schedule = schedule;
    const std::size_t n_pix = geom.pixels_per_view();
    const std::size_t total = n_pix * schedule.size();
    out.values.resize(total);

#pragma omp parallel for schedule(dynamic, 64)
    for (std::size_t idx = 0; idx < total; ++idx) {
        const std::size_t view = idx / n_pix;
        const std::size_t pixel = idx % n_pix;
        const double clean = exact_pixel_projection(ph, geom, schedule, view, pixel, d_factor);
        out.values[idx] = noisy_projection(clean, noise_frac, seed, view, pixel);
    }
    return out;
}

}  // namespace dinr
