#pragma once

#include <vector>

#include "bfm/common.hpp"

namespace bfm {

// Linear interpolation coefficients: alpha(t) = t scales the data sample,
// sigma(t) = 1 - t scales the noise, so t = 0 is pure noise and t = 1 clean
// data.
struct LinearPathSpec {
  static double alpha(double t) { return t; }
  static double sigma(double t) { return 1.0 - t; }
};

// Partition of [0,1] into M half-open segments [t_{m-1}, t_m), m = 1..M.
struct SegmentSchedule {
  int M = 0;
  std::vector<double> boundaries;  // M+1 values, boundaries[0]=0, boundaries[M]=1

  double lower(int m) const { return boundaries[m - 1]; }
  double upper(int m) const { return boundaries[m]; }
  double width(int m) const { return boundaries[m] - boundaries[m - 1]; }
};

// In-segment coordinates of a time t in segment m. The forward offset a and
// the normalized offset b are the same quantity (t - t_{m-1}) / (t_m - t_{m-1});
// both names are kept because they play different roles downstream (a drives
// interpolation, b scales the residual feature).
struct SegmentCoords {
  int m = 0;     // 1-based segment index
  double a = 0;  // in [0,1)
  double b = 0;  // in [0,1), equal to a
  double dt = 0; // segment width, > 0
};

SegmentSchedule make_uniform_schedule(int M);

// Locates t in its half-open segment. Requires 0 <= t < 1; the terminal state
// t = 1 is never routed through a segment.
SegmentCoords segment_index(double t, const SegmentSchedule& schedule);

// Segment endpoints on the linear path with one shared noise draw:
// x_lo = t_lo*x1 + (1-t_lo)*eps, x_hi = t_hi*x1 + (1-t_hi)*eps.
void segment_endpoints(const Vec& x1, const Vec& eps, double t_lo, double t_hi,
                       Vec& x_lo, Vec& x_hi);

// (1-a)*x_lo + a*x_hi
Vec interpolate_within(const Vec& x_lo, const Vec& x_hi, const SegmentCoords& coords);

// (x_hi - x_lo) / dt; constant inside a segment, equal to x1 - eps when the
// endpoints share one noise draw.
Vec segment_velocity_target(const Vec& x_lo, const Vec& x_hi, double dt);

}  // namespace bfm
