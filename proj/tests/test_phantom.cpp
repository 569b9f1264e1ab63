#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "common.hpp"
#include "dinr/phantom.hpp"

using namespace dinr;

namespace {

DynamicPhantom sphere(Vec3 c, double radius, double value, Vec3 velocity = {})
{
    DynamicPhantom ph;
    ph.primitives.push_back({c, velocity, {radius, radius, radius}, {}, value});
    return ph;
}

CoordinateSample at(double t, Vec3 p) { return {t, p.z, p.y, p.x, 0.0}; }

}  // namespace

TEST(Phantom, MuAtExamples)
{
    DynamicPhantom ph = sphere({0, 0, 0}, 1.0, 0.05);
    ph.background = 0.01;
    EXPECT_DOUBLE_EQ(mu_at(ph, at(0.0, {3, 0, 0})), 0.01);
    EXPECT_DOUBLE_EQ(mu_at(ph, at(7.0, {0, 0, 0})), 0.06);
    const DynamicPhantom moving = sphere({0, 0, 0}, 0.5, 0.2, {1, 0, 0});
    EXPECT_DOUBLE_EQ(mu_at(moving, at(1.0, {1, 0, 0})), 0.2);
    EXPECT_DOUBLE_EQ(mu_at(moving, at(0.0, {1, 0, 0})), 0.0);
}

TEST(Phantom, LineIntegralExamples)
{
    const DynamicPhantom ph = sphere({0, 0, 0}, 1.0, 0.05);
    EXPECT_NEAR(line_integral_exact(ph, {0, -5, 0}, {0, 5, 0}, 0.0), 0.1, 1e-15);
    EXPECT_EQ(line_integral_exact(ph, {3, -5, 0}, {3, 5, 0}, 0.0), 0.0);
    const DynamicPhantom unit = sphere({0, 0, 0}, 1.0, 1.0);
    EXPECT_NEAR(line_integral_exact(unit, {0.6, -5, 0}, {0.6, 5, 0}, 0.0), 1.6, 1e-14);
}

TEST(Phantom, OverlapsAdd)
{
    DynamicPhantom ph = sphere({0, 0, 0}, 1.0, 0.05);
    ph.primitives.push_back({{0, 0, 0}, {}, {0.5, 0.5, 0.5}, {}, 0.1});
    EXPECT_DOUBLE_EQ(mu_at(ph, at(0.0, {0, 0, 0})), 0.15);
    EXPECT_NEAR(line_integral_exact(ph, {0, -5, 0}, {0, 5, 0}, 0.0), 0.1 + 0.1, 1e-15);
}

TEST(Phantom, BackgroundOnlyInsideFov)
{
    DynamicPhantom ph;
    ph.background = 0.5;
    // FOV of radius 1 about x = 0: chord 2.
    EXPECT_NEAR(line_integral_exact(ph, {0, -5, 0}, {0, 5, 0}, 0.0, 0.0, 1.0), 1.0, 1e-14);
}

TEST(Phantom, MatchesDenseQuadrature)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    DynamicPhantom ph;
    ph.primitives.push_back({{0.2, -0.1, 0.0}, {0.1, 0.0, 0.05}, {0.6, 0.4, 0.5}, {0.02, -0.01, 0.0}, 0.07});
    ph.primitives.push_back({{-0.3, 0.3, 0.1}, {0.0, -0.1, 0.0}, {0.3, 0.5, 0.4}, {}, 0.03});
    const int n = 100000;
    for (int k = 0; k < 20; ++k) {
        // Endpoints just outside the objects keep the step small at the jumps.
        const Vec3 src{u(rng), -1.5, 0.3 * u(rng)}, dst{0.5 * u(rng), 1.5, 0.3 * u(rng)};
        const double t = 1.0 + u(rng);
        const double exact = line_integral_exact(ph, src, dst, t);
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = (j + 0.5) / n;
            acc += mu_at(ph, at(t, src + d * (dst - src)));
        }
        const double numeric = acc / n * norm(dst - src);
        if (exact > 1e-3) EXPECT_LT(std::abs(numeric - exact) / exact, 1e-4) << "ray " << k;
        else EXPECT_LT(std::abs(numeric - exact), 1e-6);
    }
}

TEST(Phantom, TimeTranslationConsistency)
{
    const Vec3 v{0.3, -0.2, 0.1};
    const DynamicPhantom moving = sphere({0, 0, 0}, 0.5, 0.05, v);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 500; ++k) {
        const double t = 2.0 * std::abs(u(rng));
        const DynamicPhantom shifted = sphere(t * v, 0.5, 0.05);
        const Vec3 p{u(rng), u(rng), u(rng)};
        EXPECT_EQ(mu_at(moving, at(t, p)), mu_at(shifted, at(0.0, p)));
    }
}

TEST(Phantom, NonNegative)
{
    const ScannerGeometry g = test::parallel_geometry(16, 1.0);
    const DynamicPhantom ph = compress_phantom(g, 10.0);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 1000; ++k) EXPECT_GE(mu_at(ph, at(5.0 + 5.0 * u(rng), {u(rng), u(rng), u(rng)})), 0.0);
}

TEST(Phantom, NamedScenarios)
{
    const ScannerGeometry g = test::parallel_geometry(16, 2.0);
    const ViewSchedule s = test::half_turn(10);
    const DynamicPhantom disk = named_phantom("static-disk", g, 9.0);
    ASSERT_EQ(disk.primitives.size(), 1u);
    EXPECT_DOUBLE_EQ(disk.primitives[0].semi_axes0.x, 1.0);
    EXPECT_NO_THROW(disk.validate(g, s));
    const DynamicPhantom comp = named_phantom("compress", g, 9.0);
    const auto& e = comp.primitives[0];
    EXPECT_NEAR(e.semi_axes(9.0).z, 0.6 * e.semi_axes0.z, 1e-12);
    EXPECT_DOUBLE_EQ(e.semi_axes(9.0).x, e.semi_axes0.x);
    EXPECT_NO_THROW(comp.validate(g, s));
    EXPECT_THROW(named_phantom("teapot", g, 1.0), GeometryError);
}

TEST(Phantom, ValidationRejectsEscapes)
{
    const ScannerGeometry g = test::parallel_geometry(16, 1.0);
    const ViewSchedule s = test::half_turn(10);
    DynamicPhantom ph = sphere({0, 0, 0}, 0.5, 0.05, {0.1, 0, 0});
    EXPECT_THROW(ph.validate(g, s), GeometryError);  // center reaches x = 0.9 at t = 9
    ph = sphere({0, 0, 0}, 0.5, -1.0);
    EXPECT_THROW(ph.validate(g, s), GeometryError);
    ph = sphere({0, 0, 0}, 0.5, 0.05);
    ph.primitives[0].axes_rate = {-0.1, 0, 0};
    EXPECT_THROW(ph.validate(g, s), GeometryError);
}
