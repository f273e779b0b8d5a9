#pragma once

#include <cstddef>
#include <string_view>

namespace policygnn::log {

void info(std::string_view message);
void warn(std::string_view message);

/// Warnings emitted since process start; tests use it to observe warning paths.
std::size_t warning_count();

/// Silence info output (warnings still count).
void set_quiet(bool quiet);
/// Drops every message, warnings included. Warnings are still counted.
void set_silent(bool silent);

}  // namespace policygnn::log
