#ifndef AIFMAZE_SIMD_HPP
#define AIFMAZE_SIMD_HPP

#include <cstddef>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#define AIFMAZE_HAVE_AVX2 1
#endif

// Dense kernels for the autodiff engine. Every kernel uses a fixed
// accumulation order so results are bit-identical run to run.

namespace aifmaze::simd {

inline double dot(const double* a, const double* b, int n) {
#ifdef AIFMAZE_HAVE_AVX2
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double lanes[8];
    _mm256_storeu_pd(lanes, acc0);
    _mm256_storeu_pd(lanes + 4, acc1);
    double s = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
               ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
#else
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    double s = (s0 + s1) + (s2 + s3);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
#endif
}

// y += k * x
inline void axpy(double k, const double* x, double* y, int n) {
#ifdef AIFMAZE_HAVE_AVX2
    const __m256d kk = _mm256_set1_pd(k);
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(kk, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += k * x[i];
#else
    for (int i = 0; i < n; ++i) y[i] += k * x[i];
#endif
}

// y = W x + b, W row-major [rows x cols]; b may be null.
inline void matvec(const double* W, const double* x, const double* b, double* y, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        y[r] = dot(W + static_cast<std::size_t>(r) * cols, x, cols) + (b ? b[r] : 0.0);
    }
}

// gx += W^T g
inline void matvec_t_acc(const double* W, const double* g, double* gx, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        axpy(g[r], W + static_cast<std::size_t>(r) * cols, gx, cols);
    }
}

// GW += g x^T (rank-1 update)
inline void outer_acc(double* GW, const double* g, const double* x, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        axpy(g[r], x, GW + static_cast<std::size_t>(r) * cols, cols);
    }
}

} // namespace aifmaze::simd

#endif
