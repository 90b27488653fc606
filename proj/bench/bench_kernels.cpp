// Compares the serial reference kernels against the OpenMP variants and
// verifies they agree bitwise.

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "ctrkd/kernels.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <class F>
double time_best_of(int reps, F&& fn) {
  double best = 1e30;
  for (int r = 0; r < reps; ++r) {
    auto t0 = Clock::now();
    fn();
    best = std::min(best, ms_since(t0));
  }
  return best;
}

}  // namespace

int main() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  const struct {
    int64_t m, k, n;
  } cases[] = {{256, 64, 64}, {1024, 128, 128}, {4096, 256, 64},
               {512, 512, 512}};
  const int reps = 5;

  std::printf("%-18s %12s %12s %9s %8s\n", "case", "serial(ms)", "omp(ms)",
              "speedup", "bitwise");
  for (const auto& c : cases) {
    std::vector<double> a(static_cast<size_t>(c.m * c.k));
    std::vector<double> b(static_cast<size_t>(c.k * c.n));
    for (double& v : a) v = dist(rng);
    for (double& v : b) v = dist(rng);
    std::vector<double> out_serial(static_cast<size_t>(c.m * c.n));
    std::vector<double> out_omp(out_serial.size());

    const double t_serial = time_best_of(reps, [&] {
      ctrkd::kernels::matmul_serial(a.data(), b.data(), out_serial.data(), c.m,
                                    c.k, c.n);
    });
    const double t_omp = time_best_of(reps, [&] {
      ctrkd::kernels::matmul_omp(a.data(), b.data(), out_omp.data(), c.m, c.k,
                                 c.n);
    });
    const bool same = out_serial == out_omp;
    char name[64];
    std::snprintf(name, sizeof(name), "%lldx%lldx%lld",
                  static_cast<long long>(c.m), static_cast<long long>(c.k),
                  static_cast<long long>(c.n));
    std::printf("%-18s %12.3f %12.3f %8.2fx %8s\n", name, t_serial, t_omp,
                t_serial / t_omp, same ? "yes" : "NO");
    if (!same) return 1;
  }
  return 0;
}
