#pragma once

#include <array>
#include <span>
#include <vector>

namespace uvaa::metrics {

// Every objective is maximized. Callers negate minimized objectives first.
using Point = std::array<double, 2>;
using Front = std::vector<Point>;

/// a >= b componentwise and a != b. Throws DimensionMismatch.
bool dominates(std::span<const double> a, std::span<const double> b);
bool dominates(const Point& a, const Point& b);

/// Non-dominated subset with duplicates removed, sorted by the first
/// objective ascending.
Front non_dominated(const Front& points);

/// Mean over reference points of the distance to the nearest front point.
double igd(const Front& front, const Front& reference);

/// Area dominated by `front` and bounded below by `ref`. Throws
/// PointBelowReference if some point is worse than `ref` in any objective.
double hypervolume(const Front& front, const Point& ref);

/// Componentwise worst of `points` pushed out by `margin` of each range.
Point reference_point(const Front& points, double margin = 0.1);

}  // namespace uvaa::metrics
