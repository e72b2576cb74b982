#ifndef AIFMAZE_COMMON_HPP
#define AIFMAZE_COMMON_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace aifmaze {

using Vec = std::vector<double>;

// Malformed run configuration (unknown key, bad value, invalid geometry).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Checkpoint file cannot be loaded (corrupt, truncated, or shape mismatch).
class CheckpointError : public std::runtime_error {
public:
    explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace aifmaze

#endif
