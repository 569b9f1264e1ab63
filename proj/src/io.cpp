#include "dinr/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <vector>

namespace dinr {

namespace {

template <typename T>
T to_little(T v)
{
    if constexpr (std::endian::native == std::endian::big) {
        std::array<unsigned char, sizeof(T)> b;
        std::memcpy(b.data(), &v, sizeof(T));
        std::reverse(b.begin(), b.end());
        std::memcpy(&v, b.data(), sizeof(T));
    }
    return v;
}

class Writer {
public:
    explicit Writer(std::ofstream& out) : out_(out) {}

    void magic(const char (&tag)[5]) { out_.write(tag, 4); }
    template <typename T>
    void put(T v)
    {
        v = to_little(v);
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void u32(std::uint32_t v) { put(v); }
    void u64(std::uint64_t v) { put(v); }
    void f64(double v) { put(v); }
    void f64s(std::span<const double> v)
    {
        for (double x : v) put(x);
    }
    void f32s(std::span<const double> v)
    {
        std::vector<float> buf(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) buf[i] = to_little(static_cast<float>(v[i]));
        out_.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }

private:
    std::ofstream& out_;
};

class Reader {
public:
    Reader(std::ifstream& in, std::filesystem::path path) : in_(in), path_(std::move(path)) {}

    void expect_magic(const char (&tag)[5])
    {
        char got[4] = {};
        in_.read(got, 4);
        if (!in_ || std::memcmp(got, tag, 4) != 0)
            throw IoError(path_.string() + ": bad magic, expected \"" + std::string(tag) + "\"");
    }
    void expect_version(std::uint32_t want)
    {
        const auto v = u32();
        if (v != want)
            throw IoError(path_.string() + ": unsupported format version " + std::to_string(v));
    }
    template <typename T>
    T get()
    {
        T v{};
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!in_) throw IoError(path_.string() + ": truncated file");
        return to_little(v);
    }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    double f64() { return get<double>(); }
    void f64s(std::span<double> out)
    {
        for (double& x : out) x = f64();
    }
    void f32s(std::span<double> out)
    {
        std::vector<float> buf(out.size());
        in_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!in_) throw IoError(path_.string() + ": truncated data block");
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(to_little(buf[i]));
    }
    void expect_end()
    {
        if (in_.peek() != std::char_traits<char>::eof())
            throw IoError(path_.string() + ": trailing bytes after data block");
    }
    /// Guards allocations against corrupt size fields.
    void check_remaining(std::uint64_t bytes)
    {
        const auto here = in_.tellg();
        in_.seekg(0, std::ios::end);
        const auto end = in_.tellg();
        in_.seekg(here);
        if (here < 0 || end < 0 || static_cast<std::uint64_t>(end - here) < bytes)
            throw IoError(path_.string() + ": header declares more data than the file holds");
    }

private:
    std::ifstream& in_;
    std::filesystem::path path_;
};

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    return in;
}

void finish(std::ofstream& out, const std::filesystem::path& path)
{
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

void write_projection_file(const std::filesystem::path& path, const ProjectionSet& proj)
{
    proj.validate();
    auto out = open_out(path);
    Writer w(out);
    const ScannerGeometry& g = proj.geometry;
    w.magic("PROJ");
    w.u32(kProjectionFileVersion);
    w.u64(proj.n_views());
    w.u64(g.n_rows);
    w.u64(g.n_cols);
    w.u32(g.beam == BeamType::Cone ? 1u : 0u);
    for (double v : {g.sod, g.odd, g.pixel_dx, g.pixel_dz, g.offset_cx, g.offset_cz, g.fov_radius, g.rot_center_x,
                     proj.blank_intensity})
        w.f64(v);
    w.f64s(proj.schedule.angles);
    w.f64s(proj.schedule.times);
    w.f32s(proj.values);
    finish(out, path);
}

ProjectionSet read_projection_file(const std::filesystem::path& path)
{
    auto in = open_in(path);
    Reader r(in, path);
    r.expect_magic("PROJ");
    r.expect_version(kProjectionFileVersion);
    ProjectionSet proj;
    const auto m = r.u64();
    ScannerGeometry& g = proj.geometry;
    g.n_rows = r.u64();
    g.n_cols = r.u64();
    const auto beam = r.u32();
    if (beam > 1) throw IoError(path.string() + ": unknown beam type " + std::to_string(beam));
    g.beam = beam == 1 ? BeamType::Cone : BeamType::Parallel;
    g.sod = r.f64();
    g.odd = r.f64();
    g.pixel_dx = r.f64();
    g.pixel_dz = r.f64();
    g.offset_cx = r.f64();
    g.offset_cz = r.f64();
    g.fov_radius = r.f64();
    g.rot_center_x = r.f64();
    proj.blank_intensity = r.f64();
    r.check_remaining(m * 16 + m * g.n_rows * g.n_cols * 4);
    proj.schedule.angles.resize(m);
    proj.schedule.times.resize(m);
    r.f64s(proj.schedule.angles);
    r.f64s(proj.schedule.times);
    proj.values.resize(m * g.n_rows * g.n_cols);
    r.f32s(proj.values);
    r.expect_end();
    try {
        proj.validate();
    } catch (const std::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    return proj;
}

VolumeWriter::VolumeWriter(const std::filesystem::path& path, const GridSpec& grid)
    : path_(path), out_(open_out(path)), frame_size_(grid.voxels_per_frame()), frames_(grid.frame_times.size())
{
    Writer w(out_);
    w.magic("VOL4");
    w.u32(kVolumeFileVersion);
    w.u64(frames_);
    w.u64(grid.nz);
    w.u64(grid.ny);
    w.u64(grid.nx);
    w.f64(grid.voxel_size);
    w.f64(grid.origin.x);
    w.f64(grid.origin.y);
    w.f64(grid.origin.z);
    w.f64s(grid.frame_times);
}

void VolumeWriter::write_frame(std::span<const double> values)
{
    if (values.size() != frame_size_) throw IoError(path_.string() + ": frame size mismatch");
    if (written_ == frames_) throw IoError(path_.string() + ": more frames than declared");
    Writer(out_).f32s(values);
    if (!out_) throw IoError("write failed: " + path_.string());
    ++written_;
}

void VolumeWriter::close()
{
    if (written_ != frames_)
        throw IoError(path_.string() + ": " + std::to_string(written_) + " of " + std::to_string(frames_) +
                      " frames written");
    finish(out_, path_);
    out_.close();
}

void write_volume_file(const std::filesystem::path& path, const VoxelGrid4D& vol)
{
    GridSpec grid;
    grid.nx = vol.nx;
    grid.ny = vol.ny;
    grid.nz = vol.nz;
    grid.voxel_size = vol.voxel_size;
    grid.origin = vol.origin;
    grid.frame_times = vol.frame_times;
    VolumeWriter writer(path, grid);
    for (std::size_t t = 0; t < vol.nt; ++t) writer.write_frame(vol.frame(t));
    writer.close();
}

VoxelGrid4D read_volume_file(const std::filesystem::path& path)
{
    auto in = open_in(path);
    Reader r(in, path);
    r.expect_magic("VOL4");
    r.expect_version(kVolumeFileVersion);
    VoxelGrid4D vol;
    vol.nt = r.u64();
    vol.nz = r.u64();
    vol.ny = r.u64();
    vol.nx = r.u64();
    vol.voxel_size = r.f64();
    vol.origin.x = r.f64();
    vol.origin.y = r.f64();
    vol.origin.z = r.f64();
    r.check_remaining(vol.nt * 8 + vol.nt * vol.frame_size() * 4);
    vol.frame_times.resize(vol.nt);
    r.f64s(vol.frame_times);
    vol.data.resize(vol.nt * vol.frame_size());
    r.f32s(vol.data);
    r.expect_end();
    return vol;
}

void write_checkpoint(const std::filesystem::path& path, const NetworkState& state, const OptimizerState* optimizer,
                      std::size_t next_epoch)
{
    auto out = open_out(path);
    Writer w(out);
    const NetworkConfig& c = state.config;
    const NormalizationBounds& b = state.bounds;
    w.magic("DINR");
    w.u32(kCheckpointVersion);
    w.u64(c.c_half);
    w.u64(c.n_hidden);
    w.f64(c.sigma_s);
    w.f64(c.sigma_t);
    w.f64(c.mu0);
    w.u64(c.seed);
    for (double v : {b.t_min, b.t_max, b.z_min, b.z_max, b.x_center, b.radius}) w.f64(v);
    w.f64s(std::span<const double>(state.b_matrix.data(), static_cast<std::size_t>(state.b_matrix.size())));
    w.f64s(state.params);
    w.u32(optimizer ? 1u : 0u);
    if (optimizer) {
        w.u64(next_epoch);
        w.u64(optimizer->step_count);
        w.f64s(optimizer->first_moment);
        w.f64s(optimizer->second_moment);
    }
    finish(out, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path)
{
    auto in = open_in(path);
    Reader r(in, path);
    r.expect_magic("DINR");
    r.expect_version(kCheckpointVersion);
    Checkpoint ck;
    NetworkConfig& c = ck.state.config;
    c.c_half = r.u64();
    c.n_hidden = r.u64();
    c.sigma_s = r.f64();
    c.sigma_t = r.f64();
    c.mu0 = r.f64();
    c.seed = r.u64();
    try {
        c.validate();
    } catch (const std::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    NormalizationBounds& b = ck.state.bounds;
    b.t_min = r.f64();
    b.t_max = r.f64();
    b.z_min = r.f64();
    b.z_max = r.f64();
    b.x_center = r.f64();
    b.radius = r.f64();
    const std::size_t n_params = c.parameter_count();
    r.check_remaining((c.c_half * 4 + n_params) * 8);
    ck.state.b_matrix.resize(static_cast<Eigen::Index>(c.c_half), 4);
    r.f64s(std::span<double>(ck.state.b_matrix.data(), c.c_half * 4));
    ck.state.params.resize(n_params);
    r.f64s(ck.state.params);
    const auto has_opt = r.u32();
    if (has_opt == 1) {
        ResumePoint rp;
        rp.next_epoch = r.u64();
        rp.optimizer.step_count = r.u64();
        r.check_remaining(2 * n_params * 8);
        rp.optimizer.first_moment.resize(n_params);
        rp.optimizer.second_moment.resize(n_params);
        r.f64s(rp.optimizer.first_moment);
        r.f64s(rp.optimizer.second_moment);
        rp.state = ck.state;
        ck.resume = std::move(rp);
    } else if (has_opt != 0) {
        throw IoError(path.string() + ": bad optimizer flag");
    }
    r.expect_end();
    return ck;
}

}  // namespace dinr
