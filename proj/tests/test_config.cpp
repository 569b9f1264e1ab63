#include <algorithm>
#include <numbers>

#include <gtest/gtest.h>
#include <json.hpp>

#include "dinr/config.hpp"
#include "dinr/io.hpp"
#include "dinr/rng.hpp"

using namespace dinr;
using nlohmann::json;

namespace {

json minimal()
{
    return json::parse(R"({
      "seed": 3,
      "geometry": {"beam": "parallel", "sod": 10, "odd": 10, "n_rows": 16, "n_cols": 16,
                   "pixel_dx": 0.1, "fov_radius": 0.8},
      "schedule": {"n_views": 30},
      "phantom": {"name": "static-disk"}
    })");
}

bool mentions(const ConfigError& e, const std::string& what)
{
    return std::any_of(e.problems().begin(), e.problems().end(),
                       [&](const std::string& p) { return p.find(what) != std::string::npos; });
}

}  // namespace

TEST(Config, DefaultsResolve)
{
    const RunConfig c = RunConfig::from_json(minimal());
    EXPECT_EQ(c.geometry.pixel_dz, 0.1);
    EXPECT_DOUBLE_EQ(c.geometry.offset_cx, 0.8);
    ASSERT_EQ(c.schedule.size(), 30u);
    EXPECT_DOUBLE_EQ(c.schedule.angles[1], std::numbers::pi / 30);
    EXPECT_DOUBLE_EQ(c.schedule.times[29], 29.0);
    EXPECT_EQ(c.network.seed, derive_seed(3, {seed_tag::network_init}));
    EXPECT_EQ(c.training.seed, derive_seed(3, {seed_tag::permutation}));
    EXPECT_EQ(c.phantom.primitives.size(), 1u);
    EXPECT_TRUE(c.warnings.empty());
}

TEST(Config, ToJsonRoundTrips)
{
    const RunConfig c = RunConfig::from_json(minimal());
    const json doc = c.to_json();
    EXPECT_EQ(RunConfig::from_json(doc).to_json(), doc);
}

TEST(Config, ExplicitSchedule)
{
    json doc = minimal();
    doc["schedule"] = {{"angles_deg", {0, 90}}, {"times_s", {0, 0.5}}};
    const RunConfig c = RunConfig::from_json(doc);
    EXPECT_DOUBLE_EQ(c.schedule.angles[1], std::numbers::pi / 2);
    doc["schedule"]["n_views"] = 2;
    EXPECT_THROW(RunConfig::from_json(doc), ConfigError);
}

TEST(Config, MissingGeometryNamed)
{
    json doc = minimal();
    doc.erase("geometry");
    try {
        RunConfig::from_json(doc);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_TRUE(mentions(e, "geometry"));
    }
}

TEST(Config, UnknownKeyRejected)
{
    json doc = minimal();
    doc["network"] = {{"c_halfs", 4}};
    try {
        RunConfig::from_json(doc);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_TRUE(mentions(e, "network.c_halfs"));
    }
}

TEST(Config, CollectsEveryProblem)
{
    json doc = minimal();
    doc["geometry"]["sod"] = -1;
    doc["training"] = {{"lr0", "fast"}, {"sampling_mode", "sobol"}};
    try {
        RunConfig::from_json(doc);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_TRUE(mentions(e, "lr0"));
        EXPECT_TRUE(mentions(e, "sampling_mode"));
    }
}

TEST(Config, AnisotropicPixelWarns)
{
    json doc = minimal();
    doc["geometry"]["pixel_dz"] = 0.2;
    EXPECT_FALSE(RunConfig::from_json(doc).warnings.empty());
}

TEST(Config, LoadMissingFile)
{
    EXPECT_THROW(RunConfig::load("/nonexistent/dinr.json"), IoError);
}
