#include "bfm/schedule.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace bfm {

SegmentSchedule make_uniform_schedule(int M) {
  if (M < 1) throw std::invalid_argument("make_uniform_schedule: M must be >= 1");
  SegmentSchedule s;
  s.M = M;
  s.boundaries.resize(M + 1);
  for (int m = 0; m <= M; ++m) {
    s.boundaries[m] = static_cast<double>(m) / static_cast<double>(M);
  }
  s.boundaries[0] = 0.0;
  s.boundaries[M] = 1.0;
  return s;
}

SegmentCoords segment_index(double t, const SegmentSchedule& schedule) {
  if (!(t >= 0.0 && t < 1.0)) {
    throw std::out_of_range("segment_index: t = " + std::to_string(t) +
                            " outside [0, 1)");
  }
  // First boundary strictly greater than t; its index is the 1-based segment.
  auto it = std::upper_bound(schedule.boundaries.begin(), schedule.boundaries.end(), t);
  int m = static_cast<int>(it - schedule.boundaries.begin());
  m = std::min(m, schedule.M);  // guard against t == boundaries[M-1] rounding
  SegmentCoords c;
  c.m = m;
  c.dt = schedule.width(m);
  c.a = (t - schedule.lower(m)) / c.dt;
  c.b = c.a;
  return c;
}

void segment_endpoints(const Vec& x1, const Vec& eps, double t_lo, double t_hi,
                       Vec& x_lo, Vec& x_hi) {
  check_same_dim(x1, eps, "segment_endpoints");
  if (!(t_lo >= 0.0 && t_lo < t_hi && t_hi <= 1.0)) {
    throw std::invalid_argument("segment_endpoints: need 0 <= t_lo < t_hi <= 1");
  }
  const std::size_t d = x1.size();
  x_lo.resize(d);
  x_hi.resize(d);
  const double s_lo = LinearPathSpec::sigma(t_lo);
  const double s_hi = LinearPathSpec::sigma(t_hi);
  for (std::size_t i = 0; i < d; ++i) {
    x_lo[i] = t_lo * x1[i] + s_lo * eps[i];
    x_hi[i] = t_hi * x1[i] + s_hi * eps[i];
  }
}

Vec interpolate_within(const Vec& x_lo, const Vec& x_hi, const SegmentCoords& coords) {
  check_same_dim(x_lo, x_hi, "interpolate_within");
  Vec out(x_lo.size());
  const double a = coords.a;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (1.0 - a) * x_lo[i] + a * x_hi[i];
  }
  return out;
}

Vec segment_velocity_target(const Vec& x_lo, const Vec& x_hi, double dt) {
  check_same_dim(x_lo, x_hi, "segment_velocity_target");
  if (!(dt > 0.0)) throw std::invalid_argument("segment_velocity_target: dt must be > 0");
  Vec out(x_lo.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (x_hi[i] - x_lo[i]) / dt;
  }
  return out;
}

}  // namespace bfm
