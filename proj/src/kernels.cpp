#include "ctrkd/kernels.hpp"

namespace ctrkd::kernels {

namespace {

inline void matmul_row(const double* a_row, const double* b, double* c_row,
                       int64_t k, int64_t n) {
  for (int64_t j = 0; j < n; ++j) c_row[j] = 0.0;
  for (int64_t p = 0; p < k; ++p) {
    const double av = a_row[p];
    const double* b_row = b + p * n;
    for (int64_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

inline void at_b_row(const double* a, const double* b, double* c_row,
                     int64_t m, int64_t n, int64_t k, int64_t p) {
  // c_row = row p of A^T * B, i.e. sum_i A[i,p] * B[i,:]
  for (int64_t i = 0; i < m; ++i) {
    const double av = a[i * k + p];
    const double* b_row = b + i * n;
    for (int64_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

inline void a_bt_row(const double* a_row, const double* b, double* c_row,
                     int64_t k, int64_t n) {
  // c_row += a_row[N] * B^T where B is stored [K,N]
  for (int64_t p = 0; p < k; ++p) {
    const double* b_row = b + p * n;
    double acc = 0.0;
    for (int64_t j = 0; j < n; ++j) acc += a_row[j] * b_row[j];
    c_row[p] += acc;
  }
}

}  // namespace

void matmul_serial(const double* a, const double* b, double* c,
                   int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) matmul_row(a + i * k, b, c + i * n, k, n);
}

void matmul_omp(const double* a, const double* b, double* c,
                int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) matmul_row(a + i * k, b, c + i * n, k, n);
}

void matmul_at_b_acc_serial(const double* a, const double* b, double* c,
                            int64_t m, int64_t k, int64_t n) {
  for (int64_t p = 0; p < k; ++p) at_b_row(a, b, c + p * n, m, n, k, p);
}

void matmul_at_b_acc_omp(const double* a, const double* b, double* c,
                         int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < k; ++p) at_b_row(a, b, c + p * n, m, n, k, p);
}

void matmul_a_bt_acc_serial(const double* a, const double* b, double* c,
                            int64_t m, int64_t k, int64_t n) {
  for (int64_t i = 0; i < m; ++i) a_bt_row(a + i * n, b, c + i * k, k, n);
}

void matmul_a_bt_acc_omp(const double* a, const double* b, double* c,
                         int64_t m, int64_t k, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < m; ++i) a_bt_row(a + i * n, b, c + i * k, k, n);
}

#ifdef _OPENMP
void matmul(const double* a, const double* b, double* c,
            int64_t m, int64_t k, int64_t n) {
  matmul_omp(a, b, c, m, k, n);
}
void matmul_at_b_acc(const double* a, const double* b, double* c,
                     int64_t m, int64_t k, int64_t n) {
  matmul_at_b_acc_omp(a, b, c, m, k, n);
}
void matmul_a_bt_acc(const double* a, const double* b, double* c,
                     int64_t m, int64_t k, int64_t n) {
  matmul_a_bt_acc_omp(a, b, c, m, k, n);
}
#else
void matmul(const double* a, const double* b, double* c,
            int64_t m, int64_t k, int64_t n) {
  matmul_serial(a, b, c, m, k, n);
}
void matmul_at_b_acc(const double* a, const double* b, double* c,
                     int64_t m, int64_t k, int64_t n) {
  matmul_at_b_acc_serial(a, b, c, m, k, n);
}
void matmul_a_bt_acc(const double* a, const double* b, double* c,
                     int64_t m, int64_t k, int64_t n) {
  matmul_a_bt_acc_serial(a, b, c, m, k, n);
}
#endif

}  // namespace ctrkd::kernels
