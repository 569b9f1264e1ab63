#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "common.hpp"
#include "dinr/phantom.hpp"
#include "dinr/reference.hpp"
#include "dinr/simulator.hpp"

using namespace dinr;

TEST(Simulator, EmptyPhantomGivesZero)
{
    const ScannerGeometry g = test::parallel_geometry(8, 1.0);
    const ProjectionSet p = simulate(DynamicPhantom{}, g, test::half_turn(4), 2, 0.0, 1);
    ASSERT_EQ(p.size(), 4u * 64u);
    for (double v : p.values) EXPECT_EQ(v, 0.0);
}

TEST(Simulator, CentralRayThroughDisk)
{
    // Odd column count and D = 1 put one ray exactly through the axis.
    ScannerGeometry g = test::parallel_geometry(5, 1.0);
    const DynamicPhantom ph = static_disk_phantom(g, 0.05);
    const ProjectionSet p = simulate(ph, g, test::half_turn(3), 1, 0.0, 1);
    for (std::size_t m = 0; m < 3; ++m) EXPECT_NEAR(p.values[m * 25 + 2 * 5 + 2], 0.05 * 2 * 0.5, 1e-6);
}

TEST(Simulator, NoiselessEqualsOracleAverage)
{
    const ScannerGeometry g = test::cone_geometry(10, 1.0);
    const ViewSchedule s = test::half_turn(5, 0.5);
    const DynamicPhantom ph = compress_phantom(g, 2.0);
    const ProjectionSet p = simulate(ph, g, s, 2, 0.0, 3);
    for (std::size_t m = 0; m < s.size(); ++m) {
        for (std::size_t n = 0; n < g.pixels_per_view(); ++n) {
            const auto region = pixel_region(g, n % g.n_cols, n / g.n_cols);
            double acc = 0.0;
            for (std::size_t v = 0; v < 2; ++v)
                for (std::size_t u = 0; u < 2; ++u) {
                    const Ray r = ray_for_subpixel(g, region, u, v, 2);
                    acc += line_integral_exact(ph, rotate_xy(r.src, -s.angles[m], 0.0),
                                               rotate_xy(r.dst, -s.angles[m], 0.0), s.times[m]);
                }
            EXPECT_NEAR(p.values[m * g.pixels_per_view() + n], acc / 4.0, 1e-9);
        }
    }
}

TEST(Simulator, DeterministicAndThreadIndependent)
{
    const ScannerGeometry g = test::parallel_geometry(12, 1.0);
    const ViewSchedule s = test::half_turn(6);
    const DynamicPhantom ph = static_disk_phantom(g);
    const ProjectionSet a = simulate(ph, g, s, 2, 0.01, 77);
    const ProjectionSet b = simulate(ph, g, s, 2, 0.01, 77);
    const ProjectionSet serial = reference::simulate(ph, g, s, 2, 0.01, 77);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.values, serial.values);
    const ProjectionSet c = simulate(ph, g, s, 2, 0.01, 78);
    EXPECT_NE(a.values, c.values);
}

TEST(Simulator, AddingPrimitiveNeverDecreases)
{
    const ScannerGeometry g = test::parallel_geometry(10, 1.0);
    const ViewSchedule s = test::half_turn(4);
    DynamicPhantom ph = static_disk_phantom(g);
    const ProjectionSet before = simulate(ph, g, s, 2, 0.0, 0);
    ph.primitives.push_back({{0.2, 0.1, 0.0}, {}, {0.3, 0.2, 0.4}, {}, 0.02});
    const ProjectionSet after = simulate(ph, g, s, 2, 0.0, 0);
    for (std::size_t i = 0; i < before.size(); ++i) EXPECT_GE(after.values[i], before.values[i]);
}

TEST(Simulator, NoiseStdInTransmissionSpace)
{
    const double p = 0.7, frac = 0.01;
    const double t = std::exp(-p);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int k = 0; k < n; ++k) {
        const double d = std::exp(-noisy_projection(p, frac, 123, 0, static_cast<std::size_t>(k))) - t;
        sum += d;
        sum2 += d * d;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sum2 / n - mean * mean);
    EXPECT_NEAR(sd / (frac * std::sqrt(t)), 1.0, 0.05);
}

TEST(Simulator, TransmissionFloor)
{
    // Huge noise drives transmission negative; the floor keeps p finite.
    for (std::size_t k = 0; k < 200; ++k) {
        const double v = noisy_projection(5.0, 10.0, 1, 0, k);
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_LE(v, -std::log(kTransmissionFloor) + 1e-9);
    }
}

TEST(ProjectionSet, Validation)
{
    const ScannerGeometry g = test::parallel_geometry(4, 1.0);
    ProjectionSet p = simulate(DynamicPhantom{}, g, test::half_turn(2), 1, 0.0, 0);
    EXPECT_NO_THROW(p.validate());
    p.values.pop_back();
    EXPECT_THROW(p.validate(), GeometryError);
    p.values.push_back(std::nan(""));
    EXPECT_THROW(p.validate(), GeometryError);
}
