#pragma once

#include <spdlog/logger.h>

namespace otcloak {

/// Shared stderr logger. Verbosity comes from the OTCLOAK_LOG environment
/// variable (trace, debug, info, warn, error, off); the default is warn.
spdlog::logger& log();

}  // namespace otcloak
