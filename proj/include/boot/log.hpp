#pragma once

#include <string>

namespace boot {

enum class LogLevel { error = 0, info = 1, debug = 2 };

/// Level from BOOT_LOG (error|info|debug); info when unset. Throws
/// ContractError on any other value.
LogLevel log_level_from_env();
void set_log_level(LogLevel level);
LogLevel log_level();

/// Writes "[level] message" to stderr when `level` is enabled.
void log(LogLevel level, const std::string& message);
inline void log_error(const std::string& m) { log(LogLevel::error, m); }
inline void log_info(const std::string& m) { log(LogLevel::info, m); }
inline void log_debug(const std::string& m) { log(LogLevel::debug, m); }

}  // namespace boot
