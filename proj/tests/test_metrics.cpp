#include <gtest/gtest.h>

#include <algorithm>

#include "oracles.hpp"
#include "uvaa/error.hpp"
#include "uvaa/metrics.hpp"
#include "uvaa/rng.hpp"

using namespace uvaa;
using namespace uvaa::metrics;

namespace {

Front random_front(int n, Rng& rng) {
  Front f;
  for (int i = 0; i < n; ++i) f.push_back({rng.uniform(0, 10), rng.uniform(0, 10)});
  return f;
}

// points on a decreasing curve, mutually non-dominated
Front curve(int n, Rng& rng) {
  std::vector<double> xs;
  for (int i = 0; i < n; ++i) xs.push_back(rng.uniform(0.5, 9.5));
  std::sort(xs.begin(), xs.end());
  Front f;
  for (double x : xs) f.push_back({x, 10.0 - x * x / 10.0});
  return f;
}

}  // namespace

TEST(Dominates, Examples) {
  EXPECT_TRUE(dominates(Point{3, 3}, Point{2, 3}));
  EXPECT_FALSE(dominates(Point{3, 2}, Point{2, 3}));
  EXPECT_FALSE(dominates(Point{2, 3}, Point{3, 2}));
  EXPECT_FALSE(dominates(Point{2, 3}, Point{2, 3}));
  const std::vector<double> a{1, 2, 3}, b{1, 2};
  EXPECT_THROW(dominates(std::span<const double>(a), std::span<const double>(b)), DimensionMismatch);
  EXPECT_TRUE(dominates(std::span<const double>(a), std::span<const double>(std::vector<double>{1, 2, 2})));
}

TEST(NonDominated, FiltersAndSorts) {
  const Front f{{2, 1}, {1, 2}, {1, 1}, {2, 1}, {0, 3}, {0.5, 0.5}};
  const Front nd = non_dominated(f);
  ASSERT_EQ(nd.size(), 3U);
  EXPECT_EQ(nd[0], (Point{0, 3}));
  EXPECT_EQ(nd[1], (Point{1, 2}));
  EXPECT_EQ(nd[2], (Point{2, 1}));
}

TEST(Igd, Examples) {
  const Front ref{{0, 0}, {2, 0}};
  EXPECT_EQ(igd(ref, ref), 0.0);
  EXPECT_DOUBLE_EQ(igd(Front{{0, 0}}, ref), 1.0);
  EXPECT_THROW(igd(Front{}, ref), EmptyFront);
  EXPECT_THROW(igd(ref, Front{}), EmptyFront);
}

TEST(Igd, MatchesBruteForce) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const Front f = random_front(5, rng), r = random_front(5, rng);
    std::vector<oracle::P2> fo(f.begin(), f.end()), ro(r.begin(), r.end());
    EXPECT_NEAR(igd(f, r), oracle::igd_brute(fo, ro), 1e-12);
  }
}

TEST(Igd, ZeroExactlyWhenReferenceCovered) {
  Rng rng(2);
  const Front r = random_front(6, rng);
  Front f = r;
  f.push_back({20, 20});
  EXPECT_EQ(igd(f, r), 0.0);
  f.erase(f.begin());
  EXPECT_GT(igd(f, r), 0.0);
}

TEST(Hypervolume, Examples) {
  EXPECT_DOUBLE_EQ(hypervolume({{1, 1}}, {0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(hypervolume({{1, 2}, {2, 1}}, {0, 0}), 3.0);
  EXPECT_DOUBLE_EQ(hypervolume({{1, 2}, {2, 1}, {0.5, 0.5}}, {0, 0}), 3.0);
  EXPECT_THROW(hypervolume({{1, 2}, {-1, 1}}, {0, 0}), PointBelowReference);
  EXPECT_EQ(hypervolume({}, {0, 0}), 0.0);
}

TEST(Hypervolume, MatchesMonteCarlo) {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Front f = curve(6, rng);
    const Point ref{0, 0};
    std::vector<oracle::P2> fo(f.begin(), f.end());
    const auto mc = oracle::hv_monte_carlo(fo, ref, {10, 10}, 1000000, rng);
    EXPECT_NEAR(hypervolume(f, ref), mc.value, 3 * mc.sigma);
  }
}

TEST(Hypervolume, Monotone) {
  Rng rng(4);
  Front f = curve(5, rng);
  const double base = hypervolume(f, {0, 0});
  Front dominated = f;
  dominated.push_back({f[2][0] * 0.5, f[2][1] * 0.5});
  EXPECT_DOUBLE_EQ(hypervolume(dominated, {0, 0}), base);
  Front better = f;
  better.push_back({f[2][0] + 0.01, f[2][1] + 0.01});
  EXPECT_GT(hypervolume(better, {0, 0}), base);
}

TEST(Metrics, PermutationInvariant) {
  Rng rng(5);
  Front f = random_front(8, rng);
  const Front r = random_front(8, rng);
  const double h = hypervolume(f, {-1, -1}), d = igd(f, r);
  for (int k = 0; k < 10; ++k) {
    std::shuffle(f.begin(), f.end(), rng.engine());
    EXPECT_DOUBLE_EQ(hypervolume(f, {-1, -1}), h);
    EXPECT_DOUBLE_EQ(igd(f, r), d);
  }
}

TEST(ReferencePoint, WorstMinusMargin) {
  const Front f{{1, 10}, {3, 4}, {2, 8}};
  const Point r = reference_point(f);
  EXPECT_DOUBLE_EQ(r[0], 1 - 0.2);
  EXPECT_DOUBLE_EQ(r[1], 4 - 0.6);
  const Point single = reference_point({{5, -2}});
  EXPECT_LT(single[0], 5);
  EXPECT_LT(single[1], -2);
  EXPECT_THROW(reference_point({}), EmptyFront);
}
