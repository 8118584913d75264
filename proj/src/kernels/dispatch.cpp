#include <atomic>

#include "hmpc/kernels.hpp"

namespace hmpc::kernels {

namespace {

const Kernels* pick_auto() {
  const Kernels* k = avx2_kernels();
  return k ? k : &scalar_kernels();
}

std::atomic<const Kernels*>& current() {
  static std::atomic<const Kernels*> k{pick_auto()};
  return k;
}

}  // namespace

const Kernels& active() { return *current().load(std::memory_order_acquire); }

bool select(const std::string& which) {
  const Kernels* k = nullptr;
  if (which == "auto") k = pick_auto();
  else if (which == "scalar") k = &scalar_kernels();
  else if (which == "avx2") k = avx2_kernels();
  if (!k) return false;
  current().store(k, std::memory_order_release);
  return true;
}

}  // namespace hmpc::kernels
