#include <atomic>
#include <cstdlib>
#include <string_view>

#include "bphila/simd/kernels.hpp"

namespace bphila::simd {
namespace {

const KernelTable* pick_default() {
  if (const char* env = std::getenv("BLOCKPHILA_SIMD")) {
    if (std::string_view(env) == "scalar") return &scalar_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{pick_default()};
  return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

bool select(Isa isa) {
  const KernelTable* t = nullptr;
  switch (isa) {
    case Isa::scalar: t = &scalar_kernels(); break;
    case Isa::avx2: t = avx2_kernels(); break;
  }
  if (t == nullptr) return false;
  slot().store(t, std::memory_order_release);
  return true;
}

}  // namespace bphila::simd
