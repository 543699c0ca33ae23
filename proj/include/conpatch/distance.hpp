#pragma once

#include <limits>

namespace conpatch {

// Squared Euclidean kernels shared by every search path. Accumulation runs
// in four interleaved lanes (element i feeds lane i % 4) and the lanes are
// combined as (a0 + a1) + (a2 + a3), so
//   * the exact scan, the kd-tree and the batch search agree bit for bit,
//   * trailing all-zero dimensions never change a result,
//   * every partial sum is a lower bound of the full sum.

inline double squared_distance(const double* q, const float* p, int dim) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  int i = 0;
  for (; i + 4 <= dim; i += 4) {
    const double d0 = q[i] - p[i];
    const double d1 = q[i + 1] - p[i + 1];
    const double d2 = q[i + 2] - p[i + 2];
    const double d3 = q[i + 3] - p[i + 3];
    acc[0] += d0 * d0;
    acc[1] += d1 * d1;
    acc[2] += d2 * d2;
    acc[3] += d3 * d3;
  }
  for (; i < dim; ++i) {
    const double d = q[i] - p[i];
    acc[i & 3] += d * d;
  }
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

/// Same value as squared_distance, or +inf as soon as a partial sum
/// exceeds bound.
inline double squared_distance_bounded(const double* q, const float* p, int dim, double bound) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  int i = 0;
  while (i + 4 <= dim) {
    const int stop = (i + 16 <= dim) ? i + 16 : dim - (dim - i) % 4;
    for (; i < stop; i += 4) {
      const double d0 = q[i] - p[i];
      const double d1 = q[i + 1] - p[i + 1];
      const double d2 = q[i + 2] - p[i + 2];
      const double d3 = q[i + 3] - p[i + 3];
      acc[0] += d0 * d0;
      acc[1] += d1 * d1;
      acc[2] += d2 * d2;
      acc[3] += d3 * d3;
    }
    if ((acc[0] + acc[1]) + (acc[2] + acc[3]) > bound) return std::numeric_limits<double>::infinity();
  }
  for (; i < dim; ++i) {
    const double d = q[i] - p[i];
    acc[i & 3] += d * d;
  }
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

/// Squared distance from q to the axis-aligned box [lo, hi]; never exceeds
/// squared_distance(q, p) for any p inside the box.
inline double box_distance(const double* q, const float* lo, const float* hi, int dim) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  for (int i = 0; i < dim; ++i) {
    double d = 0.0;
    if (q[i] < lo[i])
      d = q[i] - lo[i];
    else if (q[i] > hi[i])
      d = q[i] - hi[i];
    acc[i & 3] += d * d;
  }
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

}  // namespace conpatch
