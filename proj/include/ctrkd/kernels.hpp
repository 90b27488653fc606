#pragma once

#include <cstdint>

namespace ctrkd::kernels {

// Dense kernels behind the autodiff ops. Each kernel has a serial reference
// and an OpenMP variant parallelized over independent output rows with a
// static schedule; the inner accumulation order is identical, so both
// variants produce bitwise-equal results for any thread count.

// C[M,N] = A[M,K] * B[K,N]
void matmul_serial(const double* a, const double* b, double* c,
                   int64_t m, int64_t k, int64_t n);
void matmul_omp(const double* a, const double* b, double* c,
                int64_t m, int64_t k, int64_t n);

// C[K,N] += A^T[K,M] * B[M,N]   (weight-gradient shape)
void matmul_at_b_acc_serial(const double* a, const double* b, double* c,
                            int64_t m, int64_t k, int64_t n);
void matmul_at_b_acc_omp(const double* a, const double* b, double* c,
                         int64_t m, int64_t k, int64_t n);

// C[M,K] += A[M,N] * B^T[N,K]   (input-gradient shape; B stored [K,N])
void matmul_a_bt_acc_serial(const double* a, const double* b, double* c,
                            int64_t m, int64_t k, int64_t n);
void matmul_a_bt_acc_omp(const double* a, const double* b, double* c,
                         int64_t m, int64_t k, int64_t n);

// Default entry points used by the library (OpenMP builds dispatch to
// the parallel variants, serial builds alias the reference ones).
void matmul(const double* a, const double* b, double* c,
            int64_t m, int64_t k, int64_t n);
void matmul_at_b_acc(const double* a, const double* b, double* c,
                     int64_t m, int64_t k, int64_t n);
void matmul_a_bt_acc(const double* a, const double* b, double* c,
                     int64_t m, int64_t k, int64_t n);

}  // namespace ctrkd::kernels
