#pragma once

#include <string_view>

namespace steinrul::logging {

/// Progress and warnings go to stderr unless silenced.
void set_quiet(bool quiet);
bool quiet();

void info(std::string_view message);
void warn(std::string_view message);

}  // namespace steinrul::logging
