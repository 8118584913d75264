#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

// Point-scan kernels used by the free-space decomposition. Each has a scalar
// reference and an AVX2 variant; both evaluate the same expressions in the same
// order so results are bit-identical.
namespace hmpc::kernels {

struct ArgMin {
  std::ptrdiff_t index = -1;  // first index attaining the minimum, -1 when n == 0
  double value = 0.0;
};

// q_i = (m00*dx)*dx + (m01x2*dx)*dy + (m11*dy)*dy with dx = x_i - cx, dy = y_i - cy.
using ArgMinFn = ArgMin (*)(const double* x, const double* y, std::size_t n, double cx, double cy,
                            double m00, double m01x2, double m11);
// Stable in-place compaction keeping points with (a*x) + (b*y) < l. Returns the new count.
using HalfPlaneFn = std::size_t (*)(double* x, double* y, std::int32_t* id, std::size_t n, double a,
                                    double b, double l);
// Stable in-place compaction keeping points with q_i < thr.
using EllipseFn = std::size_t (*)(double* x, double* y, std::int32_t* id, std::size_t n, double cx,
                                  double cy, double m00, double m01x2, double m11, double thr);

struct Kernels {
  const char* name;
  ArgMinFn argmin;
  HalfPlaneFn keep_below;
  EllipseFn keep_inside;
};

const Kernels& scalar_kernels();
// nullptr when the build target or the running CPU lacks AVX2.
const Kernels* avx2_kernels();

// Selected implementation: AVX2 when available, else scalar.
const Kernels& active();
// "auto", "scalar" or "avx2"; returns false if the request cannot be honored.
bool select(const std::string& which);

}  // namespace hmpc::kernels
