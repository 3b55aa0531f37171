#pragma once

#include <cstdarg>

namespace kps::log {

enum class Level { Error = 0, Info = 1, Debug = 2 };

/// Level comes from KP_SHIELD_LOG (error|info|debug), default error.
Level level();

void write(Level lvl, const char* fmt, ...) __attribute__((format(printf, 2, 3)));

#define KPS_LOG_ERROR(...) ::kps::log::write(::kps::log::Level::Error, __VA_ARGS__)
#define KPS_LOG_INFO(...) ::kps::log::write(::kps::log::Level::Info, __VA_ARGS__)
#define KPS_LOG_DEBUG(...) ::kps::log::write(::kps::log::Level::Debug, __VA_ARGS__)

} // namespace kps::log
