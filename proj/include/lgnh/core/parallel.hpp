#pragma once

#include <cstddef>

namespace lgnh {

/// Global cap on worker threads for every parallel stage. 0 restores the
/// runtime default.
void set_thread_cap(int threads);
int thread_cap();

/// Reads LGNH_THREADS once; returns the value applied (0 when unset).
int apply_thread_env();

}  // namespace lgnh
