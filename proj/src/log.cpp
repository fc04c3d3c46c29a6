#include "cosmic/log.hpp"

#include <spdlog/spdlog.h>

#include <cstdlib>
#include <string>

namespace cosmic {

void init_logging() {
  spdlog::set_level(spdlog::level::warn);
  const char* env = std::getenv("COSMIC_LOG");
  if (env == nullptr) return;
  const auto level = spdlog::level::from_str(env);
  // from_str maps unknown names to off; only honour an explicit "off".
  if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
}

}  // namespace cosmic
