#include "otcloak/log.hpp"

#include <cstdlib>
#include <memory>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace otcloak {

spdlog::logger& log() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto sink = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
    auto logger = std::make_shared<spdlog::logger>("otcloak", sink);
    logger->set_pattern("[%l] %v");
    auto level = spdlog::level::warn;
    if (const char* env = std::getenv("OTCLOAK_LOG")) {
      level = spdlog::level::from_str(env);
    }
    logger->set_level(level);
    return logger;
  }();
  return *instance;
}

}  // namespace otcloak
