#include <atomic>
#include <cstdlib>
#include <string>

#include "gmnmt/core/errors.hpp"
#include "gmnmt/core/kernels.hpp"

namespace gmnmt::kernels {
namespace {

const KernelTable* lookup(Backend backend) {
  switch (backend) {
    case Backend::Scalar: return &scalar_table();
    case Backend::Avx2: return avx2_table();
    case Backend::Neon: return neon_table();
  }
  return nullptr;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{&detect()};
  return table;
}

}  // namespace

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    case Backend::Neon: return "neon";
  }
  return "unknown";
}

const KernelTable& detect() {
  if (const char* env = std::getenv("GMNMT_KERNELS")) {
    const std::string want = env;
    for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
      if (want == backend_name(b)) {
        if (const KernelTable* t = lookup(b)) return *t;
      }
    }
  }
  if (const KernelTable* t = avx2_table()) return *t;
  if (const KernelTable* t = neon_table()) return *t;
  return scalar_table();
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void select(Backend backend) {
  const KernelTable* t = lookup(backend);
  if (t == nullptr)
    throw ConfigError("kernel backend '" + std::string(backend_name(backend)) +
                      "' is not available on this machine");
  current().store(t, std::memory_order_relaxed);
}

}  // namespace gmnmt::kernels
