#include "steinrul/logging.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace steinrul::logging {
namespace {
std::atomic<bool> g_quiet{false};
std::mutex g_mutex;
}  // namespace

void set_quiet(bool quiet) { g_quiet = quiet; }
bool quiet() { return g_quiet; }

void info(std::string_view message) {
  if (g_quiet) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << message << '\n';
}

void warn(std::string_view message) {
  if (g_quiet) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << "warning: " << message << '\n';
}

}  // namespace steinrul::logging
