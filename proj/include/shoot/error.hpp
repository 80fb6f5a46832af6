#pragma once

#include <complex>
#include <sstream>
#include <stdexcept>
#include <string>

namespace shoot {

/// Error families. The CLI maps each family to its own exit code.
enum class ErrorFamily {
  config = 10,
  tail_conditions = 20,
  convergence = 30,
  certificate = 40,
};

inline const char* family_name(ErrorFamily f) {
  switch (f) {
    case ErrorFamily::config: return "config";
    case ErrorFamily::tail_conditions: return "tail-conditions";
    case ErrorFamily::convergence: return "convergence";
    case ErrorFamily::certificate: return "certificate";
  }
  return "unknown";
}

/// Every failure carries its family, the pipeline stage and (when known) the
/// energy being processed.
class Error : public std::runtime_error {
 public:
  Error(ErrorFamily family, std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), family_(family), stage_(std::move(stage)) {}

  Error(ErrorFamily family, std::string stage, const std::string& what, std::complex<double> E)
      : std::runtime_error(stage + ": " + what + " (E = " + format_energy(E) + ")"),
        family_(family), stage_(std::move(stage)), energy_(E), has_energy_(true) {}

  ErrorFamily family() const noexcept { return family_; }
  const std::string& stage() const noexcept { return stage_; }
  bool has_energy() const noexcept { return has_energy_; }
  std::complex<double> energy() const noexcept { return energy_; }
  int exit_code() const noexcept { return static_cast<int>(family_); }

  static std::string format_energy(std::complex<double> E) {
    std::ostringstream os;
    os.precision(17);
    os << E.real() << (E.imag() < 0 ? "-" : "+") << std::abs(E.imag()) << "i";
    return os.str();
  }

 private:
  ErrorFamily family_;
  std::string stage_;
  std::complex<double> energy_{};
  bool has_energy_ = false;
};

[[noreturn]] inline void fail(ErrorFamily f, const std::string& stage, const std::string& what) {
  throw Error(f, stage, what);
}

[[noreturn]] inline void fail(ErrorFamily f, const std::string& stage, const std::string& what,
                              std::complex<double> E) {
  throw Error(f, stage, what, E);
}

}  // namespace shoot
