#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace steinrul::detail {

// Runs body(i) for i in [0, n) on the OpenMP team. The first exception thrown
// by any iteration is rethrown on the calling thread once the loop finishes.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  std::exception_ptr error;
  std::mutex error_mutex;
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace steinrul::detail
