#include "mars/kernels/kernels.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace mars::kernels {

namespace {

const Table* pick() {
  if (const char* env = std::getenv("MARS_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_table();
    if (std::strcmp(env, "avx2") == 0) {
      if (const Table* t = avx2_table()) return t;
      std::fputs("mars: MARS_KERNELS=avx2 requested but unavailable, using scalar\n", stderr);
      return &scalar_table();
    }
    std::fprintf(stderr, "mars: unknown MARS_KERNELS value '%s', using default\n", env);
  }
  if (const Table* t = avx2_table()) return t;
  return &scalar_table();
}

}  // namespace

const Table& active() {
  static const Table* table = pick();
  return *table;
}

}  // namespace mars::kernels
