#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <gtest/gtest.h>

#include "common.hpp"
#include "dinr/phantom.hpp"
#include "dinr/sampler.hpp"

using namespace dinr;

TEST(Sampler, CentralPixelCount)
{
    // r = 1 mm, pitch 0.1 mm, D = 2: spacing 0.05 mm, 40 samples per sub-ray.
    const ScannerGeometry g = test::parallel_geometry(20, 1.0);
    const ViewSchedule s = test::half_turn(1);
    EXPECT_DOUBLE_EQ(sample_spacing(g, 2), 0.05);
    EXPECT_EQ(samples_per_ray(2.0, 0.05), 40u);
    const std::size_t pix = 10 * g.n_cols + 10;
    const SampleSet set = sample_pixel(g, s, pix, 2, SamplingMode::EquiSpaced, 0);
    EXPECT_EQ(set.samples.size(), 4u * 40u);
    EXPECT_EQ(set.view_index, 0u);
}

TEST(Sampler, AtLeastOneSamplePerHittingRay)
{
    EXPECT_EQ(samples_per_ray(1e-6, 0.05), 1u);
    EXPECT_EQ(samples_per_ray(0.05, 0.05), 1u);
    EXPECT_EQ(samples_per_ray(0.0500001, 0.05), 2u);
}

TEST(Sampler, ZeroAngleKeepsRayCoordinates)
{
    const ScannerGeometry g = test::parallel_geometry(16, 1.0);
    const ViewSchedule s = test::half_turn(4);
    const std::size_t col = 5, row = 7;
    const SampleSet set = sample_pixel(g, s, row * g.n_cols + col, 2, SamplingMode::EquiSpaced, 0);
    const auto region = pixel_region(g, col, row);
    for (const auto& r : set.samples) {
        const bool on_sub_ray = std::abs(r.x - (region.x_lo + 0.25 * g.pixel_dx)) < 1e-12 ||
                                std::abs(r.x - (region.x_lo + 0.75 * g.pixel_dx)) < 1e-12;
        EXPECT_TRUE(on_sub_ray);
        EXPECT_EQ(r.t, s.times[0]);
    }
}

TEST(Sampler, SamplesShareViewTimeAndStayInFov)
{
    const double x0 = 0.3;
    for (const ScannerGeometry& g : {test::parallel_geometry(12, 1.0, x0), test::cone_geometry(12, 1.0)}) {
        const ViewSchedule s = ViewSchedule::uniform(7, 2.0, 0.25);
        const std::size_t n = g.pixels_per_view();
        for (std::size_t i = 0; i < n * s.size(); i += 5) {
            const SampleSet set = sample_pixel(g, s, i, 2, SamplingMode::Randomized, 42);
            for (const auto& r : set.samples) {
                const double dx = r.x - g.rot_center_x;
                EXPECT_LE(dx * dx + r.y * r.y, g.fov_radius * g.fov_radius * (1.0 + 1e-9));
                EXPECT_EQ(r.t, s.times[i / n]);
                EXPECT_GE(r.ray_chord, 0.0);
            }
        }
    }
}

TEST(Sampler, RandomizedIsDeterministicPerSeed)
{
    const ScannerGeometry g = test::parallel_geometry(8, 1.0);
    const ViewSchedule s = test::half_turn(3);
    const auto a = sample_pixel(g, s, 100, 2, SamplingMode::Randomized, 9);
    const auto b = sample_pixel(g, s, 100, 2, SamplingMode::Randomized, 9);
    const auto c = sample_pixel(g, s, 100, 2, SamplingMode::Randomized, 10);
    ASSERT_EQ(a.samples.size(), b.samples.size());
    bool differs = false;
    for (std::size_t k = 0; k < a.samples.size(); ++k) {
        EXPECT_EQ(a.samples[k].x, b.samples[k].x);
        EXPECT_EQ(a.samples[k].y, b.samples[k].y);
        differs |= a.samples[k].x != c.samples[k].x;
    }
    EXPECT_TRUE(differs);
}

TEST(Sampler, EquiSpacedMonotoneWithUniformSpacing)
{
    const ScannerGeometry g = test::parallel_geometry(16, 1.0);
    const ViewSchedule s = test::half_turn(1);
    const double h = sample_spacing(g, 2);
    const SampleSet set = sample_pixel(g, s, 8 * 16 + 6, 2, SamplingMode::EquiSpaced, 0);
    // Group by sub-ray (consecutive samples with the same x and z at theta = 0).
    std::size_t start = 0;
    while (start < set.samples.size()) {
        std::size_t end = start + 1;
        while (end < set.samples.size() && set.samples[end].x == set.samples[start].x &&
               set.samples[end].z == set.samples[start].z)
            ++end;
        for (std::size_t k = start + 1; k + 1 < end; ++k) {
            const double step = set.samples[k].y - set.samples[k - 1].y;
            EXPECT_GT(step, 0.0);
            EXPECT_NEAR(step, h, h * 1e-9);
        }
        start = end;
    }
}

TEST(Sampler, MissingPixelHasNoSamples)
{
    ScannerGeometry g = test::parallel_geometry(8, 1.0);
    g.fov_radius = 0.2;  // only the central columns see the FOV
    const ViewSchedule s = test::half_turn(1);
    EXPECT_TRUE(sample_pixel(g, s, 0, 2, SamplingMode::EquiSpaced, 0).samples.empty());
    EXPECT_FALSE(sample_pixel(g, s, 4, 2, SamplingMode::EquiSpaced, 0).samples.empty());
}

TEST(Sampler, RotationShiftWithSymmetricPhantom)
{
    const ScannerGeometry g = test::parallel_geometry(16, 1.0);
    DynamicPhantom ph;
    ph.primitives.push_back({{0, 0, 0}, {}, {0.5, 0.5, 0.5}, {}, 0.05});
    const ViewSchedule a = ViewSchedule::uniform(3, 1.0, 1.0);
    ViewSchedule b = a;
    for (double& th : b.angles) th += 0.7;
    const std::size_t n = g.pixels_per_view();
    for (std::size_t i = 0; i < 3 * n; i += 11) {
        auto estimate = [&](const ViewSchedule& s) {
            const SampleSet set = sample_pixel(g, s, i, 2, SamplingMode::EquiSpaced, 0);
            double acc = 0.0;
            for (const auto& r : set.samples) acc += r.ray_chord * mu_at(ph, r);
            return set.samples.empty() ? 0.0 : acc / static_cast<double>(set.samples.size());
        };
        const double pa = estimate(a), pb = estimate(b);
        EXPECT_LE(std::abs(pa - pb), 1e-6 * std::max(std::abs(pa), 1e-12) + 1e-15);
    }
}

TEST(Sampler, Weight)
{
    CoordinateSample r;
    r.ray_chord = 2.0;
    EXPECT_DOUBLE_EQ(weight(r, 0.05), 0.1);
    EXPECT_DOUBLE_EQ(weight(r, 0.0425), 0.085);
    r.ray_chord = 0.0;
    EXPECT_EQ(weight(r, 0.05), 0.0);
}

TEST(Sampler, IndexOutOfRange)
{
    const ScannerGeometry g = test::parallel_geometry(4, 1.0);
    const ViewSchedule s = test::half_turn(2);
    EXPECT_THROW(sample_pixel(g, s, 32, 2, SamplingMode::EquiSpaced, 0), GeometryError);
    EXPECT_THROW(sample_pixel(g, s, 0, 0, SamplingMode::EquiSpaced, 0), GeometryError);
}
