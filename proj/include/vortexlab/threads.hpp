#pragma once

extern "C" void openblas_set_num_threads(int);
extern "C" char* openblas_get_config(void);

namespace vortexlab {

/// BLAS is the only parallelism in the artifact; 1 thread gives full
/// bitwise determinism.
inline void set_compute_threads(int n) { openblas_set_num_threads(n < 1 ? 1 : n); }

inline const char* blas_config() { return openblas_get_config(); }

} // namespace vortexlab
