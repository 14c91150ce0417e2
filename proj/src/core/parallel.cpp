#include "lgnh/core/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace lgnh {
namespace {
int g_default_threads = omp_get_max_threads();
}

void set_thread_cap(int threads) { omp_set_num_threads(threads > 0 ? threads : g_default_threads); }

int thread_cap() { return omp_get_max_threads(); }

int apply_thread_env() {
  const char* env = std::getenv("LGNH_THREADS");
  if (!env) return 0;
  try {
    const int n = std::stoi(env);
    if (n > 0) set_thread_cap(n);
    return n > 0 ? n : 0;
  } catch (const std::exception&) {
    return 0;
  }
}

}  // namespace lgnh
