#include "mdt3d/labels.hpp"

#include "mdt3d/error.hpp"

namespace mdt3d {

CoarseLabel require_coarse_label(std::string_view s) {
  if (auto c = parse_coarse_label(s)) return *c;
  throw DataError("'" + std::string(s) + "' is not a coarse label");
}

}  // namespace mdt3d
