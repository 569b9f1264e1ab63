#include "dinr/reference.hpp"

#include <cmath>
#include <numbers>

namespace dinr::reference {

namespace {

struct Activations {
    std::vector<std::vector<double>> h;  // h[0] = features, h[k+1] = layer k output
    std::vector<std::vector<double>> z;  // pre-activations
};

Activations run(const NetworkState& state, const CoordinateSample& r)
{
    const std::size_t c = state.config.c_half, w = state.width();
    const auto nr = normalize(r, state.bounds);
    Activations a;
    std::vector<double> feat(w);
    for (std::size_t q = 0; q < c; ++q) {
        double phase = 0.0;
        for (std::size_t d = 0; d < 4; ++d) phase += state.b_matrix(q, d) * nr[d];
        phase *= 2.0 * std::numbers::pi;
        feat[q] = std::cos(phase);
        feat[c + q] = std::sin(phase);
    }
    a.h.push_back(std::move(feat));
    for (std::size_t k = 0; k < state.config.n_hidden; ++k) {
        const double* W = state.params.data() + state.layer_offset(k);
        const double* b = W + w * w;
        const auto& in = a.h.back();
        std::vector<double> z(w), out(w);
        for (std::size_t o = 0; o < w; ++o) {
            double s = b[o];
            for (std::size_t i = 0; i < w; ++i) s += W[o * w + i] * in[i];
            z[o] = s;
            out[o] = swish(s);
        }
        a.z.push_back(std::move(z));
        a.h.push_back(std::move(out));
    }
    return a;
}

double head(const NetworkState& state, const std::vector<double>& h)
{
    const double* hw = state.params.data() + state.head_offset();
    double s = state.head_bias();
    for (std::size_t i = 0; i < h.size(); ++i) s += hw[i] * h[i];
    return s;
}

}  // namespace

double forward_unitless(const NetworkState& state, const CoordinateSample& r)
{
    return head(state, run(state, r).h.back());
}

void backward_sample(const NetworkState& state, const CoordinateSample& r, double upstream, std::span<double> grad)
{
    const std::size_t w = state.width();
    const Activations a = run(state, r);
    const std::size_t ho = state.head_offset();
    const double* hw = state.params.data() + ho;
    for (std::size_t i = 0; i < w; ++i) grad[ho + i] += upstream * a.h.back()[i];
    grad[ho + w] += upstream;

    std::vector<double> dh(w);
    for (std::size_t i = 0; i < w; ++i) dh[i] = upstream * hw[i];
    for (std::size_t k = state.config.n_hidden; k-- > 0;) {
        const std::size_t off = state.layer_offset(k);
        const double* W = state.params.data() + off;
        std::vector<double> dz(w);
        for (std::size_t o = 0; o < w; ++o) dz[o] = dh[o] * swish_derivative(a.z[k][o]);
        const auto& in = a.h[k];
        for (std::size_t o = 0; o < w; ++o) {
            for (std::size_t i = 0; i < w; ++i) grad[off + o * w + i] += dz[o] * in[i];
            grad[off + w * w + o] += dz[o];
        }
        std::vector<double> prev(w, 0.0);
        for (std::size_t o = 0; o < w; ++o)
            for (std::size_t i = 0; i < w; ++i) prev[i] += dz[o] * W[o * w + i];
        dh = std::move(prev);
    }
}

LocalResult local_loss_and_grad(const NetworkState& state, const ProjectionSet& proj,
                                std::span<const std::size_t> omega_k, std::size_t d_factor, SamplingMode mode,
                                std::uint64_t seed, GradientVector& grad)
{
    grad = GradientVector(state.params.size());
    const double mu0 = state.config.mu0;
    const double inv_omega = 1.0 / static_cast<double>(omega_k.size());
    LocalResult res;
    double loss = 0.0;
    for (std::size_t i : omega_k) {
        const SampleSet set = sample_pixel(proj.geometry, proj.schedule, i, d_factor, mode, seed);
        res.sample_count += set.samples.size();
        if (set.samples.empty()) {
            loss += proj.values[i] * proj.values[i];
            continue;
        }
        const double inv_phi = 1.0 / static_cast<double>(set.samples.size());
        double pbar = 0.0;
        for (const auto& s : set.samples) pbar += weight(s, mu0) * reference::forward_unitless(state, s);
        pbar *= inv_phi;
        const double resid = proj.values[i] - pbar;
        loss += resid * resid;
        for (const auto& s : set.samples)
            backward_sample(state, s, -2.0 * resid * weight(s, mu0) * inv_phi * inv_omega, grad.values);
    }
    res.loss = loss * inv_omega;
    return res;
}

ProjectionSet simulate(const DynamicPhantom& ph, const ScannerGeometry& geom, const ViewSchedule& schedule,
                       std::size_t d_factor, double noise_frac, std::uint64_t seed)
{
    ProjectionSet out;
    out.geometry = geom;
    out.schedule = schedule;
    const std::size_t n = geom.pixels_per_view();
    out.values.resize(schedule.size() * n);
    for (std::size_t m = 0; m < schedule.size(); ++m)
        for (std::size_t p = 0; p < n; ++p)
            out.values[m * n + p] =
                noisy_projection(exact_pixel_projection(ph, geom, schedule, m, p, d_factor), noise_frac, seed, m, p);
    return out;
}

VoxelGrid4D infer(const NetworkState& state, const GridSpec& grid)
{
    VoxelGrid4D vol = VoxelGrid4D::allocate(grid);
    const NormalizationBounds& b = state.bounds;
    for (std::size_t t = 0; t < vol.nt; ++t)
        for (std::size_t z = 0; z < grid.nz; ++z)
            for (std::size_t y = 0; y < grid.ny; ++y)
                for (std::size_t x = 0; x < grid.nx; ++x) {
                    const Vec3 p = grid.center(x, y, z);
                    const double dx = p.x - b.x_center;
                    if (grid.mask_fov && dx * dx + p.y * p.y > b.radius * b.radius) continue;
                    const CoordinateSample r{grid.frame_times[t], p.z, p.y, p.x, 0.0};
                    vol.data[((t * vol.nz + z) * vol.ny + y) * vol.nx + x] =
                        state.config.mu0 * reference::forward_unitless(state, r);
                }
    return vol;
}

std::vector<double> backproject(const ProjectionSet& proj, std::span<const double> filtered, std::size_t view_begin,
                                std::size_t view_end, const GridSpec& grid, double dtheta)
{
    const ScannerGeometry& g = proj.geometry;
    const long rows = static_cast<long>(g.n_rows), cols = static_cast<long>(g.n_cols);
    std::vector<double> out(grid.voxels_per_frame(), 0.0);
    auto tap = [&](std::size_t m, long r, long c) {
        if (r < 0 || c < 0 || r >= rows || c >= cols) return 0.0;
        return filtered[(m * g.n_rows + static_cast<std::size_t>(r)) * g.n_cols + static_cast<std::size_t>(c)];
    };
    for (std::size_t z = 0; z < grid.nz; ++z)
        for (std::size_t y = 0; y < grid.ny; ++y)
            for (std::size_t x = 0; x < grid.nx; ++x) {
                const Vec3 p = grid.center(x, y, z);
                const double dx = p.x - g.rot_center_x;
                if (grid.mask_fov && dx * dx + p.y * p.y > g.fov_radius * g.fov_radius) continue;
                double acc = 0.0;
                for (std::size_t m = view_begin; m < view_end; ++m) {
                    const double th = proj.schedule.angles[m];
                    const double s = (p.x - g.rot_center_x) * std::cos(th) - p.y * std::sin(th) + g.rot_center_x;
                    const double u = (s + g.offset_cx) / g.pixel_dx - 0.5;
                    const double v = (p.z + g.offset_cz) / g.pixel_dz - 0.5;
                    const long c0 = static_cast<long>(std::floor(u)), r0 = static_cast<long>(std::floor(v));
                    const double wu = u - std::floor(u), wv = v - std::floor(v);
                    acc += (1 - wv) * ((1 - wu) * tap(m, r0, c0) + wu * tap(m, r0, c0 + 1)) +
                           wv * ((1 - wu) * tap(m, r0 + 1, c0) + wu * tap(m, r0 + 1, c0 + 1));
                }
                out[(z * grid.ny + y) * grid.nx + x] = acc * dtheta;
            }
    return out;
}

}  // namespace dinr::reference
