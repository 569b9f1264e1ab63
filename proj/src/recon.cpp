#include "dinr/recon.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dinr {

Vec3 GridSpec::center(std::size_t x, std::size_t y, std::size_t z) const
{
    return {origin.x + static_cast<double>(x) * voxel_size, origin.y + static_cast<double>(y) * voxel_size,
            origin.z + static_cast<double>(z) * voxel_size};
}

void GridSpec::validate() const
{
    if (nx == 0 || ny == 0 || nz == 0) throw std::invalid_argument("grid: dimensions must be >= 1");
    if (!(voxel_size > 0.0)) throw std::invalid_argument("grid: voxel size must be > 0");
    if (frame_times.empty()) throw std::invalid_argument("grid: no frame times");
    if (!std::is_sorted(frame_times.begin(), frame_times.end()))
        throw std::invalid_argument("grid: frame times must be sorted");
}

GridSpec GridSpec::covering(const NormalizationBounds& b, double voxel_size)
{
    if (!(voxel_size > 0.0)) throw std::invalid_argument("grid: voxel size must be > 0");
    GridSpec g;
    g.voxel_size = voxel_size;
    auto count = [&](double extent) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(extent / g.voxel_size + 1e-9)));
    };
    g.nx = count(2.0 * b.radius);
    g.ny = g.nx;
    g.nz = count(b.z_max - b.z_min);
    const auto half = [&](std::size_t n) { return 0.5 * static_cast<double>(n - 1) * g.voxel_size; };
    g.origin = {b.x_center - half(g.nx), -half(g.ny), 0.5 * (b.z_min + b.z_max) - half(g.nz)};
    return g;
}

GridSpec GridSpec::covering(const ScannerGeometry& geom, const ViewSchedule& schedule, double voxel_size)
{
    GridSpec g = covering(NormalizationBounds::from(geom, schedule),
                          voxel_size > 0.0 ? voxel_size : geom.object_pixel_size());
    g.frame_times = schedule.times;
    return g;
}

VoxelGrid4D VoxelGrid4D::allocate(const GridSpec& grid)
{
    VoxelGrid4D v;
    v.nt = grid.frame_times.size();
    v.nz = grid.nz;
    v.ny = grid.ny;
    v.nx = grid.nx;
    v.voxel_size = grid.voxel_size;
    v.origin = grid.origin;
    v.frame_times = grid.frame_times;
    v.data.assign(v.nt * v.frame_size(), 0.0);
    return v;
}

namespace {

bool inside_fov(const NormalizationBounds& b, Vec3 p)
{
    const double dx = p.x - b.x_center;
    return dx * dx + p.y * p.y <= b.radius * b.radius;
}

void check_grid_in_bounds(const GridSpec& grid, const NormalizationBounds& b)
{
    const double tol = 1e-6 + 1e-9 * b.radius;
    const Vec3 lo = grid.center(0, 0, 0);
    const Vec3 hi = grid.center(grid.nx - 1, grid.ny - 1, grid.nz - 1);
    auto fail = [](const std::string& axis) {
        throw std::out_of_range("grid extends outside the network bounds along " + axis);
    };
    if (lo.x < b.x_center - b.radius - tol || hi.x > b.x_center + b.radius + tol) fail("x");
    if (lo.y < -b.radius - tol || hi.y > b.radius + tol) fail("y");
    if (lo.z < b.z_min - tol || hi.z > b.z_max + tol) fail("z");
    if (grid.frame_times.front() < b.t_min - tol || grid.frame_times.back() > b.t_max + tol) fail("t");
}

}  // namespace

std::size_t infer_stream(const NetworkState& state, const GridSpec& grid, const FrameSink& sink)
{
    grid.validate();
    check_grid_in_bounds(grid, state.bounds);

    const std::size_t per_frame = grid.voxels_per_frame();
    const std::size_t rows = grid.nz * grid.ny;
    std::vector<double> frame(per_frame);
    std::size_t evaluations = 0;

    for (std::size_t t = 0; t < grid.frame_times.size(); ++t) {
        const double time = grid.frame_times[t];
#pragma omp parallel reduction(+ : evaluations)
        {
            BatchEvaluator eval;
            std::vector<CoordinateSample> line;
            std::vector<std::size_t> slot;
#pragma omp for schedule(dynamic, 4)
            for (std::size_t row = 0; row < rows; ++row) {
                const std::size_t z = row / grid.ny;
                const std::size_t y = row % grid.ny;
                line.clear();
                slot.clear();
                for (std::size_t x = 0; x < grid.nx; ++x) {
                    const Vec3 p = grid.center(x, y, z);
                    const std::size_t idx = row * grid.nx + x;
                    if (grid.mask_fov && !inside_fov(state.bounds, p)) {
                        frame[idx] = 0.0;
                        continue;
                    }
                    line.push_back({time, p.z, p.y, p.x, 0.0});
                    slot.push_back(idx);
                }
                if (line.empty()) continue;
                const auto out = eval.forward(state, line);
                for (std::size_t j = 0; j < line.size(); ++j) frame[slot[j]] = state.config.mu0 * out[j];
                evaluations += line.size();
            }
        }
        sink(t, frame);
    }
    return evaluations;
}

VoxelGrid4D infer(const NetworkState& state, const GridSpec& grid)
{
    VoxelGrid4D vol = VoxelGrid4D::allocate(grid);
    infer_stream(state, grid, [&](std::size_t t, std::span<const double> values) {
        std::copy(values.begin(), values.end(), vol.frame(t).begin());
    });
    return vol;
}

VoxelGrid4D sample_phantom(const DynamicPhantom& ph, const GridSpec& grid, std::size_t supersample)
{
    grid.validate();
    if (supersample == 0) throw std::invalid_argument("sample_phantom: supersample must be >= 1");
    VoxelGrid4D vol = VoxelGrid4D::allocate(grid);
    const double h = grid.voxel_size;
    const auto n = static_cast<double>(supersample);
    auto offset = [&](std::size_t k) { return h * ((static_cast<double>(k) + 0.5) / n - 0.5); };
    for (std::size_t t = 0; t < vol.nt; ++t) {
        auto frame = vol.frame(t);
        const double time = grid.frame_times[t];
#pragma omp parallel for
        for (std::size_t z = 0; z < grid.nz; ++z)
            for (std::size_t y = 0; y < grid.ny; ++y)
                for (std::size_t x = 0; x < grid.nx; ++x) {
                    const Vec3 p = grid.center(x, y, z);
                    double acc = 0.0;
                    for (std::size_t a = 0; a < supersample; ++a)
                        for (std::size_t b = 0; b < supersample; ++b)
                            for (std::size_t c = 0; c < supersample; ++c)
                                acc += mu_at(ph, {time, p.z + offset(a), p.y + offset(b), p.x + offset(c), 0.0});
                    frame[(z * grid.ny + y) * grid.nx + x] = acc / (n * n * n);
                }
    }
    return vol;
}

namespace {

struct Range {
    double lo, span;
};

Range truth_range(std::span<const double> truth)
{
    const auto [mn, mx] = std::minmax_element(truth.begin(), truth.end());
    if (!(*mx > *mn)) throw MetricError("ground truth is constant; min/max normalization is undefined");
    return {*mn, *mx - *mn};
}

}  // namespace

double psnr(std::span<const double> recon, std::span<const double> truth)
{
    if (recon.size() != truth.size() || truth.empty()) throw MetricError("psnr: frame sizes differ");
    const Range r = truth_range(truth);
    double se = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = (recon[i] - truth[i]) / r.span;
        se += d * d;
    }
    const double mse = se / static_cast<double>(truth.size());
    if (mse == 0.0) return kInfinitePsnr;
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(std::span<const double> recon, std::span<const double> truth, FrameShape shape, std::size_t window)
{
    if (recon.size() != truth.size() || truth.size() != shape.size()) throw MetricError("ssim: frame sizes differ");
    if (window == 0 || shape.nx < window || shape.ny < window)
        throw MetricError("ssim: frame smaller than the " + std::to_string(window) + "-voxel window");
    const Range r = truth_range(truth);
    const double c1 = 0.01 * 0.01;  // (0.01 R)^2 with R = 1 after normalization
    const double c2 = 0.03 * 0.03;

    const std::size_t nx = shape.nx, ny = shape.ny;
    const std::size_t wx = nx - window + 1, wy = ny - window + 1;
    const double inv_n = 1.0 / static_cast<double>(window * window);
    double total = 0.0;

    for (std::size_t z = 0; z < shape.nz; ++z) {
        // Summed-area tables of a, b, a^2, b^2, ab on the normalized slice.
        const std::size_t stride = nx + 1;
        std::vector<double> sa((ny + 1) * stride, 0.0), sb(sa), saa(sa), sbb(sa), sab(sa);
        for (std::size_t y = 0; y < ny; ++y) {
            for (std::size_t x = 0; x < nx; ++x) {
                const std::size_t i = (z * ny + y) * nx + x;
                const double a = (recon[i] - r.lo) / r.span;
                const double b = (truth[i] - r.lo) / r.span;
                const std::size_t o = (y + 1) * stride + (x + 1);
                const std::size_t up = y * stride + (x + 1), left = (y + 1) * stride + x, diag = y * stride + x;
                sa[o] = a + sa[up] + sa[left] - sa[diag];
                sb[o] = b + sb[up] + sb[left] - sb[diag];
                saa[o] = a * a + saa[up] + saa[left] - saa[diag];
                sbb[o] = b * b + sbb[up] + sbb[left] - sbb[diag];
                sab[o] = a * b + sab[up] + sab[left] - sab[diag];
            }
        }
        auto box = [&](const std::vector<double>& s, std::size_t y0, std::size_t x0) {
            const std::size_t y1 = y0 + window, x1 = x0 + window;
            return s[y1 * stride + x1] - s[y0 * stride + x1] - s[y1 * stride + x0] + s[y0 * stride + x0];
        };
        double slice = 0.0;
        for (std::size_t y = 0; y < wy; ++y) {
            for (std::size_t x = 0; x < wx; ++x) {
                const double ma = box(sa, y, x) * inv_n;
                const double mb = box(sb, y, x) * inv_n;
                const double va = std::max(box(saa, y, x) * inv_n - ma * ma, 0.0);
                const double vb = std::max(box(sbb, y, x) * inv_n - mb * mb, 0.0);
                const double cov = box(sab, y, x) * inv_n - ma * mb;
                slice += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            }
        }
        total += slice / static_cast<double>(wx * wy);
    }
    return total / static_cast<double>(shape.nz);
}

QualityReport evaluate_quality(const VoxelGrid4D& recon, const VoxelGrid4D& truth)
{
    if (recon.nt != truth.nt || recon.nz != truth.nz || recon.ny != truth.ny || recon.nx != truth.nx)
        throw MetricError("volumes have different dimensions");
    QualityReport rep;
    const FrameShape shape{truth.nz, truth.ny, truth.nx};
    for (std::size_t t = 0; t < truth.nt; ++t) {
        const double p = psnr(recon.frame(t), truth.frame(t));
        const double s = ssim(recon.frame(t), truth.frame(t), shape);
        rep.per_frame.emplace_back(p, s);
        rep.psnr_db += p;
        rep.ssim += s;
    }
    rep.psnr_db /= static_cast<double>(truth.nt);
    rep.ssim /= static_cast<double>(truth.nt);
    return rep;
}

}  // namespace dinr
