#include "dinr/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "dinr/io.hpp"
#include "dinr/rng.hpp"

namespace dinr {

using nlohmann::json;

namespace {

std::string join(const std::vector<std::string>& v)
{
    std::string s;
    for (const auto& p : v) s += (s.empty() ? "" : "; ") + p;
    return s;
}

/// Reads typed fields from one JSON object and remembers which keys were used,
/// so that leftovers can be reported as unknown.
class Section {
public:
    Section(const json& node, std::string path, std::vector<std::string>& problems)
        : node_(node), path_(std::move(path)), problems_(problems)
    {
        if (!node_.is_object()) problems_.push_back(path_ + ": expected an object");
    }

    bool has(const std::string& key) const { return node_.is_object() && node_.contains(key); }

    template <typename T>
    void get(const std::string& key, T& out)
    {
        seen_.insert(key);
        if (!has(key)) return;
        try {
            out = node_.at(key).get<T>();
        } catch (const json::exception&) {
            problems_.push_back(key_path(key) + ": wrong type");
        }
    }

    template <typename T>
    void require(const std::string& key, T& out)
    {
        if (!has(key)) {
            seen_.insert(key);
            problems_.push_back(key_path(key) + ": missing");
            return;
        }
        get(key, out);
    }

    const json* child(const std::string& key)
    {
        seen_.insert(key);
        return has(key) ? &node_.at(key) : nullptr;
    }

    void finish() const
    {
        if (!node_.is_object()) return;
        for (const auto& [k, v] : node_.items())
            if (!seen_.count(k)) problems_.push_back(key_path(k) + ": unknown key");
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json& node_;
    std::string path_;
    std::vector<std::string>& problems_;
    std::set<std::string> seen_;
};

Vec3 vec3(const std::vector<double>& v, const std::string& where, std::vector<std::string>& problems)
{
    if (v.size() != 3) {
        problems.push_back(where + ": expected 3 numbers");
        return {};
    }
    return {v[0], v[1], v[2]};
}

json to_array(Vec3 v) { return json::array({v.x, v.y, v.z}); }

void parse_geometry(const json& node, RunConfig& rc, std::vector<std::string>& problems)
{
    Section s(node, "geometry", problems);
    ScannerGeometry& g = rc.geometry;
    std::string beam = "parallel";
    s.get("beam", beam);
    if (beam == "parallel")
        g.beam = BeamType::Parallel;
    else if (beam == "cone")
        g.beam = BeamType::Cone;
    else
        problems.push_back("geometry.beam: expected \"parallel\" or \"cone\"");
    s.require("sod", g.sod);
    s.require("odd", g.odd);
    s.require("n_rows", g.n_rows);
    s.require("n_cols", g.n_cols);
    s.require("pixel_dx", g.pixel_dx);
    g.pixel_dz = g.pixel_dx;
    s.get("pixel_dz", g.pixel_dz);
    // Detector centered on the axis unless offsets are given.
    g.offset_cx = 0.5 * static_cast<double>(g.n_cols) * g.pixel_dx;
    g.offset_cz = 0.5 * static_cast<double>(g.n_rows) * g.pixel_dz;
    s.get("offset_cx", g.offset_cx);
    s.get("offset_cz", g.offset_cz);
    s.require("fov_radius", g.fov_radius);
    s.get("rot_center_x", g.rot_center_x);
    s.finish();
}

void parse_schedule(const json& node, RunConfig& rc, std::vector<std::string>& problems)
{
    Section s(node, "schedule", problems);
    const bool lists = s.has("angles_deg") || s.has("times_s");
    const bool generator = s.has("n_views") || s.has("total_angle_deg") || s.has("time_per_view_s");
    if (lists && generator) {
        problems.push_back("schedule: give either angles_deg/times_s or n_views/total_angle_deg/time_per_view_s");
        return;
    }
    constexpr double deg = std::numbers::pi / 180.0;
    json src = json::object();
    if (lists) {
        std::vector<double> angles, times;
        s.require("angles_deg", angles);
        s.require("times_s", times);
        rc.schedule.angles.clear();
        for (double a : angles) rc.schedule.angles.push_back(a * deg);
        rc.schedule.times = times;
        src["angles_deg"] = angles;
        src["times_s"] = times;
    } else {
        std::size_t n = 0;
        double total = 180.0, dt = 1.0;
        s.require("n_views", n);
        s.get("total_angle_deg", total);
        s.get("time_per_view_s", dt);
        rc.schedule = ViewSchedule::uniform(n, total * deg, dt);
        src["n_views"] = n;
        src["total_angle_deg"] = total;
        src["time_per_view_s"] = dt;
    }
    rc.schedule_source = src;
    s.finish();
}

void parse_phantom(const json& node, RunConfig& rc, std::vector<std::string>& problems)
{
    Section s(node, "phantom", problems);
    if (s.has("name") && s.has("primitives")) {
        problems.push_back("phantom: give either name or primitives");
        return;
    }
    if (s.has("name")) {
        std::string name;
        double value = 0.05;
        s.get("name", name);
        s.get("value", value);
        s.finish();
        const auto& t = rc.schedule.times;
        const double duration = t.empty() ? 0.0 : t.back() - t.front();
        try {
            if (name == "static-disk")
                rc.phantom = static_disk_phantom(rc.geometry, value);
            else if (name == "compress")
                rc.phantom = compress_phantom(rc.geometry, duration, value);
            else
                rc.phantom = named_phantom(name, rc.geometry, duration);
        } catch (const std::exception& e) {
            problems.push_back("phantom.name: " + std::string(e.what()));
        }
        return;
    }
    s.get("background", rc.phantom.background);
    const json* prims = s.child("primitives");
    if (!prims) {
        problems.push_back("phantom: missing name or primitives");
    } else if (!prims->is_array()) {
        problems.push_back("phantom.primitives: expected an array");
    } else {
        for (std::size_t k = 0; k < prims->size(); ++k) {
            const std::string where = "phantom.primitives[" + std::to_string(k) + "]";
            Section p((*prims)[k], where, problems);
            std::vector<double> c, v{0, 0, 0}, a, ar{0, 0, 0};
            MovingEllipsoid e;
            p.require("center", c);
            p.get("velocity", v);
            p.require("semi_axes", a);
            p.get("axes_rate", ar);
            p.require("value", e.value);
            p.finish();
            e.center0 = vec3(c, where + ".center", problems);
            e.velocity = vec3(v, where + ".velocity", problems);
            e.semi_axes0 = vec3(a, where + ".semi_axes", problems);
            e.axes_rate = vec3(ar, where + ".axes_rate", problems);
            rc.phantom.primitives.push_back(e);
        }
    }
    s.finish();
}

void parse_network(const json& node, RunConfig& rc, bool& seed_given, std::vector<std::string>& problems)
{
    Section s(node, "network", problems);
    NetworkConfig& n = rc.network;
    s.get("c_half", n.c_half);
    s.get("n_hidden", n.n_hidden);
    s.get("sigma_s", n.sigma_s);
    s.get("sigma_t", n.sigma_t);
    s.get("mu0", n.mu0);
    seed_given = s.has("seed");
    s.get("seed", n.seed);
    s.finish();
}

void parse_training(const json& node, RunConfig& rc, bool& seed_given, std::vector<std::string>& problems)
{
    Section s(node, "training", problems);
    TrainConfig& t = rc.training;
    s.get("k_workers", t.k_workers);
    s.get("batch_per_worker", t.batch_per_worker);
    s.get("lr0", t.lr0);
    s.get("lr_decay", t.lr_decay);
    s.get("epochs", t.epochs);
    s.get("adam_beta1", t.adam_beta1);
    s.get("adam_beta2", t.adam_beta2);
    s.get("adam_eps", t.adam_eps);
    s.get("d_factor", t.d_factor);
    std::string mode = "equispaced";
    s.get("sampling_mode", mode);
    if (mode == "equispaced")
        t.sampling_mode = SamplingMode::EquiSpaced;
    else if (mode == "randomized")
        t.sampling_mode = SamplingMode::Randomized;
    else
        problems.push_back("training.sampling_mode: expected \"equispaced\" or \"randomized\"");
    seed_given = s.has("seed");
    s.get("seed", t.seed);
    s.get("max_iterations", t.max_iterations);
    s.get("chunk_samples", t.chunk_samples);
    std::string exec = "threads";
    s.get("execution", exec);
    if (exec == "threads")
        t.execution = Execution::Threads;
    else if (exec == "serial")
        t.execution = Execution::Serial;
    else
        problems.push_back("training.execution: expected \"threads\" or \"serial\"");
    s.get("checkpoint_every", rc.checkpoint_every);
    s.get("log_wall_time", rc.log_wall_time);
    s.finish();
}

void parse_outputs(const json& node, RunConfig& rc, std::vector<std::string>& problems)
{
    Section s(node, "outputs", problems);
    OutputPaths& o = rc.outputs;
    s.get("projections", o.projections);
    s.get("checkpoint", o.checkpoint);
    s.get("train_log", o.train_log);
    s.get("volume", o.volume);
    s.get("metrics", o.metrics);
    s.finish();
}

template <typename F>
void check(std::vector<std::string>& problems, const std::string& where, F&& f)
{
    try {
        f();
    } catch (const std::exception& e) {
        problems.push_back(where + ": " + e.what());
    }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error("invalid config: " + join(problems)), problems_(std::move(problems))
{
}

RunConfig RunConfig::from_json(const json& doc)
{
    std::vector<std::string> problems;
    RunConfig rc;
    Section top(doc, "", problems);
    if (!doc.is_object()) throw ConfigError(problems);

    top.get("seed", rc.seed);
    top.get("noise_frac", rc.noise_frac);
    if (const json* sim = top.child("simulation")) {
        Section s(*sim, "simulation", problems);
        s.get("d_factor", rc.simulate_d_factor);
        s.get("blank_intensity", rc.blank_intensity);
        s.finish();
    }

    const json* geom = top.child("geometry");
    if (!geom)
        problems.push_back("geometry: missing section");
    else
        parse_geometry(*geom, rc, problems);

    const json* sched = top.child("schedule");
    if (!sched)
        problems.push_back("schedule: missing section");
    else
        parse_schedule(*sched, rc, problems);

    // Physics sections depend on geometry and schedule; skip them if those failed.
    const bool base_ok = problems.empty();
    if (base_ok) {
        check(problems, "geometry", [&] { rc.geometry.validate(); });
        check(problems, "schedule", [&] { rc.schedule.validate(); });
    }

    const json* ph = top.child("phantom");
    if (ph && problems.empty()) parse_phantom(*ph, rc, problems);

    bool net_seed = false, train_seed = false;
    if (const json* n = top.child("network")) parse_network(*n, rc, net_seed, problems);
    if (const json* t = top.child("training")) parse_training(*t, rc, train_seed, problems);
    if (const json* o = top.child("outputs")) parse_outputs(*o, rc, problems);
    top.finish();

    // Every stream derives from the top-level seed unless a section pins its own.
    if (!net_seed) rc.network.seed = derive_seed(rc.seed, {seed_tag::network_init});
    if (!train_seed) rc.training.seed = derive_seed(rc.seed, {seed_tag::permutation});

    if (!(rc.noise_frac >= 0.0) || !std::isfinite(rc.noise_frac)) problems.push_back("noise_frac: must be >= 0");
    if (rc.simulate_d_factor == 0) problems.push_back("simulation.d_factor: must be >= 1");
    if (!(rc.blank_intensity > 0.0)) problems.push_back("simulation.blank_intensity: must be > 0");
    check(problems, "network", [&] { rc.network.validate(); });
    check(problems, "training", [&] { rc.training.validate(); });
    if (ph && problems.empty()) check(problems, "phantom", [&] { rc.phantom.validate(rc.geometry, rc.schedule); });

    if (!problems.empty()) throw ConfigError(std::move(problems));

    if (std::abs(rc.geometry.pixel_dz - rc.geometry.pixel_dx) > 1e-12 * rc.geometry.pixel_dx)
        rc.warnings.push_back("geometry: pixel_dz differs from pixel_dx; sample spacing uses pixel_dx");
    return rc;
}

RunConfig RunConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError({path.string() + ": " + e.what()});
    }
    return from_json(doc);
}

json RunConfig::to_json() const
{
    const ScannerGeometry& g = geometry;
    json doc;
    doc["seed"] = seed;
    doc["noise_frac"] = noise_frac;
    doc["simulation"] = {{"d_factor", simulate_d_factor}, {"blank_intensity", blank_intensity}};
    doc["geometry"] = {{"beam", g.beam == BeamType::Cone ? "cone" : "parallel"},
                       {"sod", g.sod},
                       {"odd", g.odd},
                       {"n_rows", g.n_rows},
                       {"n_cols", g.n_cols},
                       {"pixel_dx", g.pixel_dx},
                       {"pixel_dz", g.pixel_dz},
                       {"offset_cx", g.offset_cx},
                       {"offset_cz", g.offset_cz},
                       {"fov_radius", g.fov_radius},
                       {"rot_center_x", g.rot_center_x}};
    doc["schedule"] = schedule_source;
    json prims = json::array();
    for (const auto& e : phantom.primitives)
        prims.push_back({{"center", to_array(e.center0)},
                         {"velocity", to_array(e.velocity)},
                         {"semi_axes", to_array(e.semi_axes0)},
                         {"axes_rate", to_array(e.axes_rate)},
                         {"value", e.value}});
    doc["phantom"] = {{"background", phantom.background}, {"primitives", prims}};
    doc["network"] = {{"c_half", network.c_half},   {"n_hidden", network.n_hidden}, {"sigma_s", network.sigma_s},
                      {"sigma_t", network.sigma_t}, {"mu0", network.mu0},           {"seed", network.seed}};
    const TrainConfig& t = training;
    doc["training"] = {{"k_workers", t.k_workers},
                       {"batch_per_worker", t.batch_per_worker},
                       {"lr0", t.lr0},
                       {"lr_decay", t.lr_decay},
                       {"epochs", t.epochs},
                       {"adam_beta1", t.adam_beta1},
                       {"adam_beta2", t.adam_beta2},
                       {"adam_eps", t.adam_eps},
                       {"d_factor", t.d_factor},
                       {"sampling_mode", t.sampling_mode == SamplingMode::Randomized ? "randomized" : "equispaced"},
                       {"seed", t.seed},
                       {"max_iterations", t.max_iterations},
                       {"chunk_samples", t.chunk_samples},
                       {"execution", t.execution == Execution::Serial ? "serial" : "threads"},
                       {"checkpoint_every", checkpoint_every},
                       {"log_wall_time", log_wall_time}};
    doc["outputs"] = {{"projections", outputs.projections},
                      {"checkpoint", outputs.checkpoint},
                      {"train_log", outputs.train_log},
                      {"volume", outputs.volume},
                      {"metrics", outputs.metrics}};
    return doc;
}

}  // namespace dinr
