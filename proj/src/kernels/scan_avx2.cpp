#include "hmpc/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>

namespace hmpc::kernels {

namespace {

#define HMPC_AVX2 __attribute__((target("avx2")))

HMPC_AVX2 inline __m256d metric4(__m256d x, __m256d y, __m256d cx, __m256d cy, __m256d m00,
                                 __m256d m01, __m256d m11) {
  const __m256d dx = _mm256_sub_pd(x, cx);
  const __m256d dy = _mm256_sub_pd(y, cy);
  const __m256d t0 = _mm256_mul_pd(_mm256_mul_pd(m00, dx), dx);
  const __m256d t1 = _mm256_mul_pd(_mm256_mul_pd(m01, dx), dy);
  const __m256d t2 = _mm256_mul_pd(_mm256_mul_pd(m11, dy), dy);
  return _mm256_add_pd(_mm256_add_pd(t0, t1), t2);
}

HMPC_AVX2 ArgMin argmin_avx2(const double* x, const double* y, std::size_t n, double cx, double cy,
                             double m00, double m01x2, double m11) {
  ArgMin best;
  if (n == 0) return best;
  const __m256d vcx = _mm256_set1_pd(cx), vcy = _mm256_set1_pd(cy);
  const __m256d v00 = _mm256_set1_pd(m00), v01 = _mm256_set1_pd(m01x2), v11 = _mm256_set1_pd(m11);
  std::size_t i = 0;
  if (n >= 4) {
    __m256d bestv = metric4(_mm256_loadu_pd(x), _mm256_loadu_pd(y), vcx, vcy, v00, v01, v11);
    __m256d besti = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
    __m256d idx = besti;
    const __m256d four = _mm256_set1_pd(4.0);
    for (i = 4; i + 4 <= n; i += 4) {
      idx = _mm256_add_pd(idx, four);
      const __m256d q = metric4(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), vcx, vcy, v00, v01, v11);
      const __m256d lt = _mm256_cmp_pd(q, bestv, _CMP_LT_OQ);
      bestv = _mm256_blendv_pd(bestv, q, lt);
      besti = _mm256_blendv_pd(besti, idx, lt);
    }
    alignas(32) double bv[4], bi[4];
    _mm256_store_pd(bv, bestv);
    _mm256_store_pd(bi, besti);
    best.index = static_cast<std::ptrdiff_t>(bi[0]);
    best.value = bv[0];
    for (int l = 1; l < 4; ++l) {
      const auto li = static_cast<std::ptrdiff_t>(bi[l]);
      if (bv[l] < best.value || (bv[l] == best.value && li < best.index)) {
        best.index = li;
        best.value = bv[l];
      }
    }
  }
  for (; i < n; ++i) {
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

// Vector predicate, branchless stable compaction of each group of four.
HMPC_AVX2 inline std::size_t compact4(double* x, double* y, std::int32_t* id, std::size_t i,
                                      std::size_t w, int mask) {
  for (int l = 0; l < 4; ++l) {
    x[w] = x[i + l];
    y[w] = y[i + l];
    id[w] = id[i + l];
    w += (mask >> l) & 1;
  }
  return w;
}

HMPC_AVX2 std::size_t keep_below_avx2(double* x, double* y, std::int32_t* id, std::size_t n,
                                      double a, double b, double l) {
  const __m256d va = _mm256_set1_pd(a), vb = _mm256_set1_pd(b), vl = _mm256_set1_pd(l);
  std::size_t w = 0, i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_add_pd(_mm256_mul_pd(va, _mm256_loadu_pd(x + i)),
                                    _mm256_mul_pd(vb, _mm256_loadu_pd(y + i)));
    const int mask = _mm256_movemask_pd(_mm256_cmp_pd(v, vl, _CMP_LT_OQ));
    w = compact4(x, y, id, i, w, mask);
  }
  for (; i < n; ++i) {
    const double v = (a * x[i]) + (b * y[i]);
    x[w] = x[i];
    y[w] = y[i];
    id[w] = id[i];
    w += v < l ? 1 : 0;
  }
  return w;
}

HMPC_AVX2 std::size_t keep_inside_avx2(double* x, double* y, std::int32_t* id, std::size_t n,
                                       double cx, double cy, double m00, double m01x2, double m11,
                                       double thr) {
  const __m256d vcx = _mm256_set1_pd(cx), vcy = _mm256_set1_pd(cy);
  const __m256d v00 = _mm256_set1_pd(m00), v01 = _mm256_set1_pd(m01x2), v11 = _mm256_set1_pd(m11);
  const __m256d vt = _mm256_set1_pd(thr);
  std::size_t w = 0, i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d q = metric4(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), vcx, vcy, v00, v01, v11);
    const int mask = _mm256_movemask_pd(_mm256_cmp_pd(q, vt, _CMP_LT_OQ));
    w = compact4(x, y, id, i, w, mask);
  }
  for (; i < n; ++i) {
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

const Kernels kAvx2{"avx2", argmin_avx2, keep_below_avx2, keep_inside_avx2};

}  // namespace

const Kernels* avx2_kernels() {
  static const bool ok = __builtin_cpu_supports("avx2");
  return ok ? &kAvx2 : nullptr;
}

}  // namespace hmpc::kernels

#else

namespace hmpc::kernels {
const Kernels* avx2_kernels() { return nullptr; }
}  // namespace hmpc::kernels

#endif
