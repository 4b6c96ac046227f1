#include "reinforce/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

#include "reinforce/error.hpp"

namespace reinforce {

unsigned resolve_threads(std::optional<unsigned> requested) {
  if (requested) {
    if (*requested == 0) throw InvalidArgument("thread count must be >= 1");
    return *requested;
  }
  if (const char* env = std::getenv("REINFORCE_LAB_THREADS"); env && *env) {
    unsigned value = 0;
    const char* end = env + std::strlen(env);
    auto [ptr, ec] = std::from_chars(env, end, value);
    if (ec != std::errc{} || ptr != end || value == 0) {
      throw ConfigError("REINFORCE_LAB_THREADS must be a positive integer");
    }
    return value;
  }
  return 1;
}

}  // namespace reinforce
