#include "dinr/sampler.hpp"

#include <cmath>
#include <string>

#include "dinr/rng.hpp"

namespace dinr {

double sample_spacing(const ScannerGeometry& geom, std::size_t d_factor)
{
    return geom.object_pixel_size() / static_cast<double>(d_factor);
}

std::size_t samples_per_ray(double chord, double spacing)
{
    if (chord <= 0.0) return 1;
    const double n = std::ceil(chord / spacing - 1e-9);
    return n < 1.0 ? 1 : static_cast<std::size_t>(n);
}

std::size_t sample_pixel_into(const ScannerGeometry& geom, const ViewSchedule& schedule, std::size_t i,
                              std::size_t d_factor, SamplingMode mode, std::uint64_t seed,
                              std::vector<CoordinateSample>& out)
{
    const std::size_t n_pix = geom.pixels_per_view();
    if (d_factor == 0) throw GeometryError("d_factor must be >= 1");
    if (i >= n_pix * schedule.size())
        throw GeometryError("projection index " + std::to_string(i) + " out of range");

    const std::size_t view = i / n_pix;
    const std::size_t pix = i % n_pix;
    const double theta = schedule.angles[view];
    const double t = schedule.times[view];
    const DetectorPixelRegion region = pixel_region(geom, pix % geom.n_cols, pix / geom.n_cols);
    const double spacing = sample_spacing(geom, d_factor);

    Stream stream;
    if (mode == SamplingMode::Randomized) stream.seed(derive_seed(seed, {seed_tag::sampling, i}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const std::size_t before = out.size();
    for (std::size_t v = 0; v < d_factor; ++v) {
        for (std::size_t u = 0; u < d_factor; ++u) {
            const Ray ray = ray_for_subpixel(geom, region, u, v, d_factor);
            if (!ray.hits) continue;
            const double len = ray.length();
            const double chord = ray.chord();
            const std::size_t n = samples_per_ray(chord, spacing);
            for (std::size_t k = 0; k < n; ++k) {
                double delta;
                if (mode == SamplingMode::EquiSpaced) {
                    // Midpoint of [k h, min((k+1) h, chord)].
                    const double a = static_cast<double>(k) * spacing;
                    const double b = (k + 1 == n) ? chord : static_cast<double>(k + 1) * spacing;
                    delta = ray.delta_min + 0.5 * (a + b) / len;
                } else {
                    delta = ray.delta_min + unit(stream) * (ray.delta_max - ray.delta_min);
                }
                // Rotating the object by theta is the same as rotating the
                // lab-frame sample by -theta.
                const Vec3 p = rotate_xy(ray.at(delta), -theta, geom.rot_center_x);
                out.push_back({t, p.z, p.y, p.x, chord});
            }
        }
    }
    return out.size() - before;
}

SampleSet sample_pixel(const ScannerGeometry& geom, const ViewSchedule& schedule, std::size_t i,
                       std::size_t d_factor, SamplingMode mode, std::uint64_t seed)
{
    SampleSet set;
    set.pixel_index = i;
    set.view_index = i / geom.pixels_per_view();
    set.mode = mode;
    sample_pixel_into(geom, schedule, i, d_factor, mode, seed, set.samples);
    return set;
}

}  // namespace dinr
