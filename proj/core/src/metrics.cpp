#include "uvaa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uvaa/error.hpp"

namespace uvaa::metrics {

bool dominates(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("dominates: dimension mismatch");
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strict = true;
  }
  return strict;
}

bool dominates(const Point& a, const Point& b) {
  return dominates(std::span<const double>(a), std::span<const double>(b));
}

Front non_dominated(const Front& points) {
  Front sorted = points;
  // f1 descending, f2 descending: a point survives iff its f2 beats every
  // point with larger (or equal) f1 seen so far.
  std::sort(sorted.begin(), sorted.end(), [](const Point& a, const Point& b) {
    return a[0] != b[0] ? a[0] > b[0] : a[1] > b[1];
  });
  Front out;
  double best = -std::numeric_limits<double>::infinity();
  for (const Point& p : sorted) {
    if (p[1] > best) {
      out.push_back(p);
      best = p[1];
    }
  }
  std::reverse(out.begin(), out.end());
  return out;
}

double igd(const Front& front, const Front& reference) {
  if (front.empty() || reference.empty()) throw EmptyFront("igd: empty front");
  double total = 0.0;
  for (const Point& r : reference) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point& p : front) best = std::min(best, std::hypot(p[0] - r[0], p[1] - r[1]));
    total += best;
  }
  return total / static_cast<double>(reference.size());
}

double hypervolume(const Front& front, const Point& ref) {
  for (const Point& p : front)
    if (p[0] < ref[0] || p[1] < ref[1]) throw PointBelowReference("hypervolume: point below reference");
  Front sorted = front;
  std::sort(sorted.begin(), sorted.end(), [](const Point& a, const Point& b) {
    return a[0] != b[0] ? a[0] > b[0] : a[1] > b[1];
  });
  double area = 0.0;
  double top = ref[1];
  for (const Point& p : sorted) {
    if (p[1] > top) {
      area += (p[0] - ref[0]) * (p[1] - top);
      top = p[1];
    }
  }
  return area;
}

Point reference_point(const Front& points, double margin) {
  if (points.empty()) throw EmptyFront("reference_point: no points");
  Point lo = points[0], hi = points[0];
  for (const Point& p : points)
    for (int k = 0; k < 2; ++k) {
      lo[k] = std::min(lo[k], p[k]);
      hi[k] = std::max(hi[k], p[k]);
    }
  Point ref;
  for (int k = 0; k < 2; ++k) {
    double range = hi[k] - lo[k];
    if (range <= 0.0) range = std::max(std::abs(lo[k]), 1.0);
    ref[k] = lo[k] - margin * range;
  }
  return ref;
}

}  // namespace uvaa::metrics
