#include "sfn/blas_env.hpp"

#include <cstdlib>
#include <cstring>
#include <string>

extern "C" {
void openblas_set_num_threads(int);
char* openblas_get_corename(void);
}

#ifdef __linux__
#include <unistd.h>
#endif

namespace sfn {

namespace {

bool is_generic_kernel(const char* name) {
  // Kernel families OpenBLAS falls back to when CPUID detection fails.
  static const char* generic[] = {"Prescott", "Northwood", "Katmai",
                                  "Core2",    "Nehalem",   "Atom",
                                  "Banias",   "generic"};
  for (const char* g : generic) {
    if (std::strcmp(name, g) == 0) return true;
  }
  return false;
}

}  // namespace

void init_blas_env(int argc, char** argv) {
  (void)argc;
  (void)argv;
#ifdef __linux__
  if (!std::getenv("OPENBLAS_CORETYPE") && !std::getenv("SFN_BLAS_REEXEC")) {
    __builtin_cpu_init();
    const char* want = nullptr;
    if (__builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512dq") &&
        __builtin_cpu_supports("avx512bw") && __builtin_cpu_supports("avx512vl")) {
      want = "SKYLAKEX";
    } else if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
      want = "HASWELL";
    }
    if (want && is_generic_kernel(openblas_get_corename())) {
      setenv("OPENBLAS_CORETYPE", want, 1);
      setenv("SFN_BLAS_REEXEC", "1", 1);
      execv("/proc/self/exe", argv);
      // If the re-exec fails we continue on the slow kernel.
    }
  }
#endif
  openblas_set_num_threads(1);
}

}  // namespace sfn
