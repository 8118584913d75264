#include "hmpc/kernels.hpp"

namespace hmpc::kernels {

namespace {

ArgMin argmin_scalar(const double* x, const double* y, std::size_t n, double cx, double cy,
                     double m00, double m01x2, double m11) {
  ArgMin best;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - cx;
    const double dy = y[i] - cy;
    const double q = (m00 * dx) * dx + (m01x2 * dx) * dy + (m11 * dy) * dy;
    if (best.index < 0 || q < best.value) {
      best.index = static_cast<std::ptrdiff_t>(i);
      best.value = q;
    }
  }
  return best;
}

std::size_t keep_below_scalar(double* x, double* y, std::int32_t* id, std::size_t n, double a,
                              double b, double l) {
  std::size_t w = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = (a * x[i]) + (b * y[i]);
    x[w] = x[i];
    y[w] = y[i];
    id[w] = id[i];
    w += v < l ? 1 : 0;
  }
  return w;
}

std::size_t keep_inside_scalar(double* x, double* y, std::int32_t* id, std::size_t n, double cx,
                               double cy, double m00, double m01x2, double m11, double thr) {
  std::size_t w = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - cx;
    const double dy = y[i] - cy;
    const double q = (m00 * dx) * dx + (m01x2 * dx) * dy + (m11 * dy) * dy;
    x[w] = x[i];
    y[w] = y[i];
    id[w] = id[i];
    w += q < thr ? 1 : 0;
  }
  return w;
}

const Kernels kScalar{"scalar", argmin_scalar, keep_below_scalar, keep_inside_scalar};

}  // namespace

const Kernels& scalar_kernels() { return kScalar; }

}  // namespace hmpc::kernels
