#pragma once

#include <string>

namespace diffcdr::log {

// Level comes from DIFFCDR_LOG (error|info|debug); default is info.
void init_from_env();
void set_level(const std::string& level);

void error(const std::string& msg);
void warn(const std::string& msg);
void info(const std::string& msg);
void debug(const std::string& msg);

}  // namespace diffcdr::log
