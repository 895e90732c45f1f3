#include "claimlab/kernels.hpp"

#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace claimlab::kernels {

namespace {
// Fixed reduction block so partial sums are independent of the thread count.
constexpr std::size_t kReduceBlock = 4096;
}  // namespace

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n > 0 ? n : omp_get_num_procs());
#else
  (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] = acc;
    }
  }
}

void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_tn_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < k; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < m; ++p) {
      const double api = a[p * k + i];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

void add_bias_rows(double* c, const double* bias, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += bias[j];
  }
}

void col_sums_acc(const double* a, double* out, std::size_t m, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += a[i * n + j];
    out[j] += acc;
  }
}

void softmax_rows(const double* logits, double* probs, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* in = logits + i * n;
    double* out = probs + i * n;
    double mx = in[0];
    for (std::size_t j = 1; j < n; ++j) mx = in[j] > mx ? in[j] : mx;
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[j] = std::exp(in[j] - mx);
      sum += out[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < n; ++j) out[j] *= inv;
  }
}

double sum_squares(const double* x, std::size_t n) {
  const std::size_t blocks = (n + kReduceBlock - 1) / kReduceBlock;
  double total = 0.0;
  for (std::size_t bidx = 0; bidx < blocks; ++bidx) {
    const std::size_t lo = bidx * kReduceBlock;
    const std::size_t hi = lo + kReduceBlock < n ? lo + kReduceBlock : n;
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += x[i] * x[i];
    total += acc;
  }
  return total;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void gather_rows(const double* table, const int* ids, double* out,
                 std::size_t n_ids, std::size_t width) {
  for (std::size_t i = 0; i < n_ids; ++i) {
    const double* src = table + static_cast<std::size_t>(ids[i]) * width;
    double* dst = out + i * width;
    for (std::size_t j = 0; j < width; ++j) dst[j] = src[j];
  }
}

void scatter_rows_acc(const int* ids, const double* grad_in, double* table,
                      std::size_t n_ids, std::size_t width) {
  for (std::size_t j = 0; j < width; ++j) {
    for (std::size_t i = 0; i < n_ids; ++i) {
      table[static_cast<std::size_t>(ids[i]) * width + j] += grad_in[i * width + j];
    }
  }
}

}  // namespace serial

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] = acc;
    }
  }
}

void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_tn_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < k; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < m; ++p) {
      const double api = a[p * k + i];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

void add_bias_rows(double* c, const double* bias, std::size_t m, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) ci[j] += bias[j];
  }
}

void col_sums_acc(const double* a, double* out, std::size_t m, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) acc += a[i * n + j];
    out[j] += acc;
  }
}

void softmax_rows(const double* logits, double* probs, std::size_t m, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < m; ++i) {
    serial::softmax_rows(logits + i * n, probs + i * n, 1, n);
  }
}

double sum_squares(const double* x, std::size_t n) {
  const std::size_t blocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<double> partial(blocks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::size_t bidx = 0; bidx < blocks; ++bidx) {
    const std::size_t lo = bidx * kReduceBlock;
    const std::size_t hi = lo + kReduceBlock < n ? lo + kReduceBlock : n;
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += x[i] * x[i];
    partial[bidx] = acc;
  }
  double total = 0.0;
  for (double p : partial) total += p;  // fixed combine order
  return total;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t n) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void gather_rows(const double* table, const int* ids, double* out,
                 std::size_t n_ids, std::size_t width) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n_ids; ++i) {
    const double* src = table + static_cast<std::size_t>(ids[i]) * width;
    double* dst = out + i * width;
    for (std::size_t j = 0; j < width; ++j) dst[j] = src[j];
  }
}

void scatter_rows_acc(const int* ids, const double* grad_in, double* table,
                      std::size_t n_ids, std::size_t width) {
  // Parallel over columns: duplicate ids collide on rows, never on (row, col).
#pragma omp parallel for schedule(static)
  for (std::size_t j = 0; j < width; ++j) {
    for (std::size_t i = 0; i < n_ids; ++i) {
      table[static_cast<std::size_t>(ids[i]) * width + j] += grad_in[i * width + j];
    }
  }
}

}  // namespace claimlab::kernels
