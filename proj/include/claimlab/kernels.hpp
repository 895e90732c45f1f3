#pragma once

#include <cstddef>

// Dense compute kernels behind the model code. Each kernel has an OpenMP
// variant (the default entry points) and a serial reference under
// kernels::serial. The parallel variants split work over *independent output
// elements* and reduce each element in the same fixed order as the reference,
// so results are bitwise identical for any thread count. Reductions use a
// fixed block size for the same reason.

namespace claimlab::kernels {

void set_threads(int n);  // <= 0 restores the OpenMP default
int max_threads();

// c[m x n] = a[m x k] * b[n x k]^T
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);

// c[m x n] = a[m x k] * b[k x n]
void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);

// c[k x n] += a[m x k]^T * b[m x n]
void matmul_tn_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n);

// c[i][j] += bias[j]
void add_bias_rows(double* c, const double* bias, std::size_t m, std::size_t n);

// out[j] += sum_i a[i][j]
void col_sums_acc(const double* a, double* out, std::size_t m, std::size_t n);

// Row-wise softmax with max subtraction.
void softmax_rows(const double* logits, double* probs, std::size_t m, std::size_t n);

// Fixed-block reduction; deterministic for any thread count.
double sum_squares(const double* x, std::size_t n);

void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);

// out[i] = table[ids[i]] (rows of the given width)
void gather_rows(const double* table, const int* ids, double* out,
                 std::size_t n_ids, std::size_t width);

// table[ids[i]] += grad_in[i]; parallel over columns so duplicate ids are
// still accumulated in a fixed order.
void scatter_rows_acc(const int* ids, const double* grad_in, double* table,
                      std::size_t n_ids, std::size_t width);

// Serial reference implementations, kept for the equivalence tests and the
// benchmark baseline.
namespace serial {

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_tn_acc(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n);
void add_bias_rows(double* c, const double* bias, std::size_t m, std::size_t n);
void col_sums_acc(const double* a, double* out, std::size_t m, std::size_t n);
void softmax_rows(const double* logits, double* probs, std::size_t m, std::size_t n);
double sum_squares(const double* x, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double alpha, double* x, std::size_t n);
void gather_rows(const double* table, const int* ids, double* out,
                 std::size_t n_ids, std::size_t width);
void scatter_rows_acc(const int* ids, const double* grad_in, double* table,
                      std::size_t n_ids, std::size_t width);

}  // namespace serial

}  // namespace claimlab::kernels
