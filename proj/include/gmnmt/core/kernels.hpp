#pragma once

// Inner-loop arithmetic used by the tensor ops. Each backend provides the same
// table of entry points; the scalar table is the reference every vector
// variant is tested against.

#include <cstddef>
#include <string_view>

namespace gmnmt::kernels {

enum class Backend { Scalar, Avx2, Neon };

struct KernelTable {
  Backend backend;
  const char* name;
  /// C[m x n] += A[m x k] * B[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c);
  /// C[m x n] += A[m x k] * B[n x k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c);
  /// C[m x n] += A[k x m]^T * B[k x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c);
  double (*dot)(const double* x, const double* y, std::size_t n);
  /// y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  /// out = x + y (out may alias x or y)
  void (*add)(std::size_t n, const double* x, const double* y, double* out);
  /// out = x * y elementwise
  void (*mul)(std::size_t n, const double* x, const double* y, double* out);
};

const KernelTable& scalar_table();
/// nullptr when the backend was not compiled in or the CPU lacks it.
const KernelTable* avx2_table();
const KernelTable* neon_table();

/// Best available backend, honoring GMNMT_KERNELS=scalar|avx2|neon.
const KernelTable& detect();

/// Table used by all tensor ops in this process.
const KernelTable& active();
/// Switches the process-wide table; throws ConfigError if unavailable.
void select(Backend backend);

std::string_view backend_name(Backend backend);

}  // namespace gmnmt::kernels
