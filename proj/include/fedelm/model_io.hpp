#pragma once

#include <string>

#include "fedelm/federation.hpp"

namespace fedelm {

// Device model state file (.model): the .osuv intermediates block plus
// beta, P and the per-peer merge ledger.
//   magic "OSMF" | version u16 | device_id (u16 + UTF-8) |
//   osuv block (u32 length + bytes) |
//   beta f64[n_hidden*n_output] | p f64[n_hidden^2] |
//   peer count u32 | per peer: id (u16 + UTF-8), timestamp u64,
//   contribution osuv block (u32 length + bytes)

inline constexpr std::uint16_t kModelFileVersion = 1;

std::vector<std::uint8_t> encode_edge_state(const EdgeState& state);
EdgeState decode_edge_state(const std::vector<std::uint8_t>& bytes);

void save_edge_state(const EdgeState& state, const std::string& path);
EdgeState load_edge_state(const std::string& path);

void save_bytes(const std::vector<std::uint8_t>& bytes, const std::string& path);
std::vector<std::uint8_t> load_bytes(const std::string& path);

}  // namespace fedelm
