#include "uvaa/rng.hpp"

namespace uvaa {

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::initializer_list<std::uint64_t> indices) noexcept {
  std::uint64_t h = splitmix64(master ^ fnv1a64(tag));
  for (std::uint64_t k : indices) h = splitmix64(h ^ k);
  return h;
}

}  // namespace uvaa
