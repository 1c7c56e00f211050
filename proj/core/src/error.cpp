#include "dfx/error.hpp"

namespace dfx {

std::string_view to_string(Errc kind) noexcept {
  switch (kind) {
    case Errc::validation: return "validation";
    case Errc::duplicate: return "duplicate";
    case Errc::integrity: return "integrity";
    case Errc::configuration: return "configuration";
    case Errc::dimension: return "dimension";
    case Errc::convergence: return "convergence";
    case Errc::singularity: return "singularity";
    case Errc::inference: return "inference";
    case Errc::filter: return "filter";
    case Errc::sample_size: return "sample_size";
    case Errc::degenerate_moderator: return "degenerate_moderator";
    case Errc::boundary: return "boundary";
    case Errc::iteration: return "iteration";
    case Errc::auth: return "auth";
    case Errc::rejected: return "rejected";
    case Errc::io: return "io";
    case Errc::parse: return "parse";
    case Errc::usage: return "usage";
  }
  return "unknown";
}

}  // namespace dfx
