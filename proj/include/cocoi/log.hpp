#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <string>

namespace cocoi {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

namespace detail {

inline LogLevel log_threshold() {
  static const LogLevel lvl = [] {
    const char* env = std::getenv("COCOI_LOG");
    if (!env) return LogLevel::warn;
    if (!std::strcmp(env, "error")) return LogLevel::error;
    if (!std::strcmp(env, "warn")) return LogLevel::warn;
    if (!std::strcmp(env, "info")) return LogLevel::info;
    if (!std::strcmp(env, "debug")) return LogLevel::debug;
    return LogLevel::warn;
  }();
  return lvl;
}

inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

template <typename... Args>
void log(LogLevel lvl, const char* fmt, Args... args) {
  if (lvl > detail::log_threshold()) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(detail::log_mutex());
  std::fprintf(stderr, "[%s] ", names[static_cast<int>(lvl)]);
  if constexpr (sizeof...(args) == 0)
    std::fputs(fmt, stderr);
  else
    std::fprintf(stderr, fmt, args...);
  std::fputc('\n', stderr);
}

#define COCOI_LOG_ERROR(...) ::cocoi::log(::cocoi::LogLevel::error, __VA_ARGS__)
#define COCOI_LOG_WARN(...) ::cocoi::log(::cocoi::LogLevel::warn, __VA_ARGS__)
#define COCOI_LOG_INFO(...) ::cocoi::log(::cocoi::LogLevel::info, __VA_ARGS__)
#define COCOI_LOG_DEBUG(...) ::cocoi::log(::cocoi::LogLevel::debug, __VA_ARGS__)

}  // namespace cocoi
