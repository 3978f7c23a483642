#include "ellipsol/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>

namespace ellipsol {

namespace {
std::shared_ptr<spdlog::logger> logger() {
  static auto l = [] {
    auto lg = spdlog::stderr_color_mt("ellipsol");
    lg->set_pattern("[%l] %v");
    lg->set_level(spdlog::level::info);
    return lg;
  }();
  return l;
}
}  // namespace

void set_log_level(const std::string& level) {
  if (level == "error") logger()->set_level(spdlog::level::err);
  else if (level == "debug") logger()->set_level(spdlog::level::debug);
  else logger()->set_level(spdlog::level::info);
}

bool init_logging() {
  const char* env = std::getenv("ELLIPSOL_LOG");
  const std::string level = env ? env : "info";
  set_log_level(level);
  return level == "error" || level == "info" || level == "debug";
}

void log_info(const std::string& msg) { logger()->info(msg); }
void log_debug(const std::string& msg) { logger()->debug(msg); }

}  // namespace ellipsol
