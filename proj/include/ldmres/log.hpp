#pragma once

#include <string>

namespace ldmres {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

// Level comes from LDMRES_LOG (quiet|info|debug), default info.
LogLevel log_level();

void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace ldmres
