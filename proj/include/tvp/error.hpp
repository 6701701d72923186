#pragma once

#include <stdexcept>
#include <string>

namespace tvp {

// Base of every error raised by the library. `kind()` is a stable token used in
// machine-readable error reports.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  [[nodiscard]] const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

#define TVP_DEFINE_ERROR(Name, token)                                          \
  class Name : public Error {                                                  \
  public:                                                                      \
    explicit Name(const std::string& what) : Error(token, what) {}             \
  };

TVP_DEFINE_ERROR(OutOfBoundsError, "out_of_bounds")
TVP_DEFINE_ERROR(FormatError, "format")
TVP_DEFINE_ERROR(ShapeError, "shape")
TVP_DEFINE_ERROR(DomainError, "domain")
TVP_DEFINE_ERROR(PreconditionError, "precondition")
TVP_DEFINE_ERROR(CapacityError, "capacity")
TVP_DEFINE_ERROR(NumericalError, "numerical")
TVP_DEFINE_ERROR(DegenerateNoiseError, "degenerate_noise")
TVP_DEFINE_ERROR(NonUniqueError, "non_unique")
TVP_DEFINE_ERROR(ConfigError, "config")
TVP_DEFINE_ERROR(UsageError, "usage")

#undef TVP_DEFINE_ERROR

} // namespace tvp
