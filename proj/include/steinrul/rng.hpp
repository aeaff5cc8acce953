#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace steinrul {

using Rng = std::mt19937_64;

/// Independent generator for a labeled purpose. The same (seed, label, a, b)
/// always yields the same stream, so work can be split across threads without
/// changing results. Labels in use: "init", "shuffle", "dropout", "bbb-eps",
/// "bbb-eval".
Rng make_stream(std::uint64_t seed, std::string_view label, std::uint64_t a = 0,
                std::uint64_t b = 0);

}  // namespace steinrul
