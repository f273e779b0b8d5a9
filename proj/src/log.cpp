#include "policygnn/log.hpp"

#include <atomic>

#include <spdlog/spdlog.h>

namespace policygnn::log {

namespace {
std::atomic<std::size_t> warnings{0};
}

void info(std::string_view message) { spdlog::info("{}", message); }

void warn(std::string_view message) {
  warnings.fetch_add(1, std::memory_order_relaxed);
  spdlog::warn("{}", message);
}

std::size_t warning_count() { return warnings.load(std::memory_order_relaxed); }

void set_quiet(bool quiet) { spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info); }

void set_silent(bool silent) { spdlog::set_level(silent ? spdlog::level::off : spdlog::level::info); }

}  // namespace policygnn::log
