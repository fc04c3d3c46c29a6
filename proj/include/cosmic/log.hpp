#pragma once

namespace cosmic {

// Sets the spdlog level from COSMIC_LOG (trace, debug, info, warn, error, off).
// Unset or unrecognised values leave the level at warn.
void init_logging();

}  // namespace cosmic
