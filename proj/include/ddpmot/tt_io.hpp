#pragma once

#include "ddpmot/tt.hpp"

#include <filesystem>
#include <iosfwd>

namespace ddpmot {

// Container layout:
//   bytes 0..7    magic "DDPMOTTT"
//   bytes 8..15   header length H, little-endian uint64
//   bytes 16..    JSON header {"d", "mode_sizes", "ranks", "cores_offset"}
//   zero padding up to cores_offset (a multiple of 8)
//   cores 1..d, each a row-major (R_{k-1}, N_k, R_k) block of little-endian float64
void write_tt(std::ostream& out, const TTTensor& t);
TTTensor read_tt(std::istream& in);

void save_tt(const std::filesystem::path& path, const TTTensor& t);
TTTensor load_tt(const std::filesystem::path& path);

}  // namespace ddpmot
