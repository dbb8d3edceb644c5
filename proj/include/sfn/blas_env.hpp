#ifndef SFN_BLAS_ENV_HPP
#define SFN_BLAS_ENV_HPP

namespace sfn {

// Pins the BLAS backend to a single thread (all parallelism in this project
// is run-level fan-out) and, on Linux, re-executes the process once with
// OPENBLAS_CORETYPE set when OpenBLAS picked a pre-AVX kernel on a CPU that
// reports AVX2/AVX-512. OpenBLAS reads that variable while the library is
// being loaded, before main() runs, so a setenv() here would come too late.
// Call first thing in main().
void init_blas_env(int argc, char** argv);

}  // namespace sfn

#endif
