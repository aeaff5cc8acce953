#include "steinrul/format.hpp"

#include <charconv>

#include "steinrul/error.hpp"

namespace steinrul {

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  if (dynamic_cast<const DataError*>(&e)) return 2;
  return 1;
}

}  // namespace steinrul
