#include "vmsim/rng.hpp"

namespace vmsim {

std::uint64_t derive_seed(std::uint64_t base, std::string_view name) {
    return mix64(base ^ detail::fnv1a64(name));
}

} // namespace vmsim
