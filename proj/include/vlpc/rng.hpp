#pragma once
// Seed-stream helpers: derive independent, reproducible substreams from one
// master seed so Monte-Carlo loops can be chunked (and chunks run on threads)
// without changing the result.

#include <cstdint>
#include <random>

namespace vlpc {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Engine for substream `stream` of master `seed`.
inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(stream)));
}

/// Thread budget from VLPC_THREADS (>=1); defaults to 1.
int thread_budget();

}  // namespace vlpc
