// SPDX-License-Identifier: Apache-2.0
#include "iqa/rng.hpp"

#include <sstream>

#include "iqa/error.hpp"

namespace iqa {

std::uint64_t derive_seed(std::uint64_t root, std::string_view stream,
                          std::uint64_t index) {
  // FNV-1a over the stream name.
  std::uint64_t name_hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream) {
    name_hash ^= c;
    name_hash *= 0x100000001b3ULL;
  }
  return hash_combine(hash_combine(mix64(root), name_hash), index);
}

std::string rng_state_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng rng_from_state_string(const std::string& state) {
  Rng rng;
  if (state.empty()) return rng;
  std::istringstream is(state);
  is >> rng;
  if (is.fail()) throw Error(ErrorCode::kIo, "malformed rng_state");
  return rng;
}

}  // namespace iqa
