#include "hagg/parallel.hpp"

#include <cstdlib>
#include <string>

namespace hagg {

std::size_t worker_count() {
  if (const char* env = std::getenv("HAGG_WORKERS"); env != nullptr && *env != '\0') {
    try {
      const long value = std::stol(env);
      if (value >= 1) return static_cast<std::size_t>(value);
    } catch (const std::exception&) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace hagg
