#ifndef TREEDYN_COMMON_HPP
#define TREEDYN_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace treedyn {

inline constexpr const char* kVersion = "0.1.0";

// Default cap on exact level enumerations (number of prefixes).
inline constexpr std::uint64_t kDefaultEnumerationCap = std::uint64_t{1} << 22;

struct CapExceeded : std::runtime_error {
  explicit CapExceeded(const std::string& what) : std::runtime_error(what) {}
};

struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct NotStabilized : std::runtime_error {
  std::size_t horizon;
  explicit NotStabilized(std::size_t h)
      : std::runtime_error("radon-nikodym product did not stabilize within horizon " +
                           std::to_string(h)),
        horizon(h) {}
};

struct NoActivityBound : std::runtime_error {
  explicit NoActivityBound(const std::string& what) : std::runtime_error(what) {}
};

struct NotDepthCompatible : std::runtime_error {
  std::string witness;
  NotDepthCompatible(const std::string& what, std::string w)
      : std::runtime_error(what), witness(std::move(w)) {}
};

struct ScheduleOverflow : std::runtime_error {
  explicit ScheduleOverflow(const std::string& what) : std::runtime_error(what) {}
};

struct StageNotFound : std::runtime_error {
  std::size_t stage;
  StageNotFound(std::size_t l, const std::string& what)
      : std::runtime_error(what), stage(l) {}
};

struct SeparationNotFound : std::runtime_error {
  explicit SeparationNotFound(const std::string& what) : std::runtime_error(what) {}
};

struct ConditionFailed : std::runtime_error {
  std::string witness;
  ConditionFailed(const std::string& what, std::string w)
      : std::runtime_error(what), witness(std::move(w)) {}
};

struct ConfigError : std::runtime_error {
  std::string pointer;  // JSON-pointer-ish location
  ConfigError(const std::string& what, std::string ptr = "")
      : std::runtime_error(what), pointer(std::move(ptr)) {}
};

}  // namespace treedyn

#endif
