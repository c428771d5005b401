#include "ldmres/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace ldmres {

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("LDMRES_LOG");
        if (!env) return LogLevel::Info;
        if (std::strcmp(env, "quiet") == 0) return LogLevel::Quiet;
        if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
        return LogLevel::Info;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info)
        std::fprintf(stderr, "[ldmres] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::Debug)
        std::fprintf(stderr, "[ldmres:debug] %s\n", msg.c_str());
}

}  // namespace ldmres
