#pragma once

#include <cstdlib>
#include <iostream>
#include <string>
#include <string_view>

namespace g2n::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

/// Verbosity comes from the G2N_LOG environment variable (error|warn|info|debug).
inline Level threshold() {
    static const Level level = [] {
        const char* raw = std::getenv("G2N_LOG");
        if (raw == nullptr) return Level::warn;
        const std::string_view v{raw};
        if (v == "error") return Level::error;
        if (v == "info") return Level::info;
        if (v == "debug") return Level::debug;
        return Level::warn;
    }();
    return level;
}

inline void write(Level level, std::string_view message) {
    if (level > threshold()) return;
    static constexpr std::string_view names[] = {"error", "warn", "info", "debug"};
    std::cerr << "[g2n " << names[static_cast<int>(level)] << "] " << message << '\n';
}

inline void error(std::string_view m) { write(Level::error, m); }
inline void warn(std::string_view m) { write(Level::warn, m); }
inline void info(std::string_view m) { write(Level::info, m); }
inline void debug(std::string_view m) { write(Level::debug, m); }

}  // namespace g2n::log
