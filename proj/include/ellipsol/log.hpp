#pragma once

#include <string>

namespace ellipsol {

/// Reads ELLIPSOL_LOG (error, info or debug; info when unset) and routes library
/// messages to stderr. Returns false for an unrecognized value, which leaves info in place.
bool init_logging();
void set_log_level(const std::string& level);

void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace ellipsol
