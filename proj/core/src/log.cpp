#include "diffcdr/log.hpp"

#include <cstdlib>
#include <mutex>
#include <stdexcept>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace diffcdr::log {
namespace {

spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_mt("diffcdr");
    l->set_pattern("[%H:%M:%S.%e] [%l] %v");
    l->set_level(spdlog::level::info);
    return l;
  }();
  return *instance;
}

}  // namespace

void set_level(const std::string& level) {
  if (level == "error") {
    logger().set_level(spdlog::level::err);
  } else if (level == "info") {
    logger().set_level(spdlog::level::info);
  } else if (level == "debug") {
    logger().set_level(spdlog::level::debug);
  } else {
    throw std::invalid_argument("DIFFCDR_LOG must be one of error|info|debug, got '" + level + "'");
  }
}

void init_from_env() {
  if (const char* v = std::getenv("DIFFCDR_LOG")) set_level(v);
}

void error(const std::string& msg) { logger().error(msg); }
void warn(const std::string& msg) { logger().warn(msg); }
void info(const std::string& msg) { logger().info(msg); }
void debug(const std::string& msg) { logger().debug(msg); }

}  // namespace diffcdr::log
