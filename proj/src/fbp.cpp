#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fftw3.h>

#include "dinr/recon.hpp"

namespace dinr {

std::vector<std::pair<std::size_t, std::size_t>> view_groups(std::size_t n_views, std::size_t frames)
{
    if (frames == 0) throw std::invalid_argument("fbp: frames must be >= 1");
    if (frames > n_views) throw std::invalid_argument("fbp: more frames than views");
    const std::size_t per = (n_views + frames - 1) / frames;
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (std::size_t b = 0; b < n_views; b += per) groups.emplace_back(b, std::min(b + per, n_views));
    return groups;
}

std::vector<double> ramp_filter(const ProjectionSet& proj)
{
    const ScannerGeometry& g = proj.geometry;
    const std::size_t cols = g.n_cols;
    const std::size_t lines = proj.n_views() * g.n_rows;
    std::size_t len = 1;
    while (len < 2 * cols) len <<= 1;
    const std::size_t bins = len / 2 + 1;
    const double tau = g.pixel_dx;

    // Band-limited ramp from the discrete Ram-Lak kernel, wrapped circularly.
    std::vector<double> kernel(len, 0.0);
    kernel[0] = 1.0 / (4.0 * tau * tau);
    for (std::size_t n = 1; n < len / 2; ++n) {
        if (n % 2 == 1) {
            const double v = -1.0 / (std::numbers::pi * std::numbers::pi * double(n * n) * tau * tau);
            kernel[n] = v;
            kernel[len - n] = v;
        }
    }

    std::vector<double> line(len);
    fftw_complex* spec = fftw_alloc_complex(bins);
    fftw_complex* kspec = fftw_alloc_complex(bins);
    fftw_plan fwd = fftw_plan_dft_r2c_1d(static_cast<int>(len), line.data(), spec, FFTW_ESTIMATE);
    fftw_plan inv = fftw_plan_dft_c2r_1d(static_cast<int>(len), spec, line.data(), FFTW_ESTIMATE);
    fftw_plan kplan = fftw_plan_dft_r2c_1d(static_cast<int>(len), kernel.data(), kspec, FFTW_ESTIMATE);
    fftw_execute(kplan);

    // Convolution sum scaled by the sample pitch; FFTW's inverse is unnormalized.
    const double scale = tau / static_cast<double>(len);
    std::vector<double> out(proj.size());
    for (std::size_t l = 0; l < lines; ++l) {
        std::fill(line.begin(), line.end(), 0.0);
        std::copy_n(proj.values.begin() + static_cast<std::ptrdiff_t>(l * cols), cols, line.begin());
        fftw_execute(fwd);
        for (std::size_t k = 0; k < bins; ++k) {
            const double re = spec[k][0] * kspec[k][0] - spec[k][1] * kspec[k][1];
            const double im = spec[k][0] * kspec[k][1] + spec[k][1] * kspec[k][0];
            spec[k][0] = re;
            spec[k][1] = im;
        }
        fftw_execute(inv);
        for (std::size_t c = 0; c < cols; ++c) out[l * cols + c] = line[c] * scale;
    }
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    fftw_destroy_plan(kplan);
    fftw_free(spec);
    fftw_free(kspec);
    return out;
}

namespace {

/// Angular step of the scan, used as the quadrature weight of each view.
double angular_step(const ViewSchedule& s)
{
    if (s.size() < 2) return std::numbers::pi;
    return std::abs(s.angles.back() - s.angles.front()) / static_cast<double>(s.size() - 1);
}

}  // namespace

VoxelGrid4D fbp_frames(const ProjectionSet& proj, std::size_t frames, GridSpec grid)
{
    const ScannerGeometry& g = proj.geometry;
    if (g.beam != BeamType::Parallel) throw std::invalid_argument("fbp: unsupported geometry (cone beam)");
    proj.validate();

    const auto groups = view_groups(proj.n_views(), frames);
    grid.frame_times.clear();
    for (const auto& [b, e] : groups)
        grid.frame_times.push_back(0.5 * (proj.schedule.times[b] + proj.schedule.times[e - 1]));
    grid.validate();

    const std::vector<double> filtered = ramp_filter(proj);
    const double dtheta = angular_step(proj.schedule);
    const std::size_t cols = g.n_cols, rows = g.n_rows, per_view = cols * rows;
    const double x0 = g.rot_center_x;

    VoxelGrid4D vol = VoxelGrid4D::allocate(grid);
    for (std::size_t f = 0; f < groups.size(); ++f) {
        const auto [vb, ve] = groups[f];
        std::vector<double> cs, sn;
        for (std::size_t m = vb; m < ve; ++m) {
            cs.push_back(std::cos(proj.schedule.angles[m]));
            sn.push_back(std::sin(proj.schedule.angles[m]));
        }
        auto frame = vol.frame(f);
#pragma omp parallel for collapse(2) schedule(static)
        for (std::size_t z = 0; z < grid.nz; ++z) {
            for (std::size_t y = 0; y < grid.ny; ++y) {
                for (std::size_t x = 0; x < grid.nx; ++x) {
                    const Vec3 p = grid.center(x, y, z);
                    if (grid.mask_fov && (p.x - x0) * (p.x - x0) + p.y * p.y > g.fov_radius * g.fov_radius) {
                        frame[(z * grid.ny + y) * grid.nx + x] = 0.0;
                        continue;
                    }
                    const double v = (p.z + g.offset_cz) / g.pixel_dz - 0.5;
                    const double vf = std::floor(v);
                    const double wv = v - vf;
                    const long r0 = static_cast<long>(vf);
                    double acc = 0.0;
                    for (std::size_t m = vb; m < ve; ++m) {
                        // Detector x of the object point after rotating the object by theta.
                        const double s = (p.x - x0) * cs[m - vb] - p.y * sn[m - vb] + x0;
                        const double u = (s + g.offset_cx) / g.pixel_dx - 0.5;
                        const double uf = std::floor(u);
                        const double wu = u - uf;
                        const long c0 = static_cast<long>(uf);
                        const double* view = filtered.data() + m * per_view;
                        auto tap = [&](long r, long c) {
                            if (r < 0 || c < 0 || r >= long(rows) || c >= long(cols)) return 0.0;
                            return view[static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c)];
                        };
                        acc += (1.0 - wv) * ((1.0 - wu) * tap(r0, c0) + wu * tap(r0, c0 + 1)) +
                               wv * ((1.0 - wu) * tap(r0 + 1, c0) + wu * tap(r0 + 1, c0 + 1));
                    }
                    frame[(z * grid.ny + y) * grid.nx + x] = acc * dtheta;
                }
            }
        }
    }
    return vol;
}

}  // namespace dinr
