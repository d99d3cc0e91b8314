#include "vlpc/rng.hpp"

#include <cstdlib>

namespace vlpc {

int thread_budget() {
    const char* env = std::getenv("VLPC_THREADS");
    if (!env) return 1;
    const long v = std::strtol(env, nullptr, 10);
    return v >= 1 ? static_cast<int>(v) : 1;
}

}  // namespace vlpc
