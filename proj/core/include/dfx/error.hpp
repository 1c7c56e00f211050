#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dfx {

/// Failure categories raised across the library. The CLI maps every kind to
/// exit status 1 except `usage`.
enum class Errc {
  validation,
  duplicate,
  integrity,
  configuration,
  dimension,
  convergence,
  singularity,
  inference,
  filter,
  sample_size,
  degenerate_moderator,
  boundary,
  iteration,
  auth,
  rejected,
  io,
  parse,
  usage,
};

std::string_view to_string(Errc kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Errc kind() const noexcept { return kind_; }

 private:
  Errc kind_;
};

[[noreturn]] inline void fail(Errc kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace dfx
