#include "primseg/parallel.hpp"

#include <atomic>
#include <cstdlib>

namespace primseg {

namespace {

int initial_threads() {
  if (const char* env = std::getenv("PRIMSEG_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::atomic<int>& thread_setting() {
  static std::atomic<int> value{initial_threads()};
  return value;
}

}  // namespace

int num_threads() { return thread_setting().load(); }

void set_num_threads(int n) { thread_setting().store(std::max(1, n)); }

}  // namespace primseg
