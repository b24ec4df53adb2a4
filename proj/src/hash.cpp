#include "licm/hash.hpp"

#include <fmt/format.h>

namespace licm {

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

}  // namespace licm
