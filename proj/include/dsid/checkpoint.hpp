#pragma once

#include "dsid/netcore.hpp"

#include <filesystem>
#include <vector>

namespace dsid {

/// "DSM1" model checkpoint. Layout (little-endian), see docs/formats.md:
///   magic "DSM1" | u32 version=1 | u32 topology | u32 x7 dims | f64 dropout_p
///   | f64 bn_eps | f64 bn_momentum | parameters as f64 in declaration order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<char> encode_checkpoint(const DsidModel& model);
DsidModel decode_checkpoint(const std::vector<char>& bytes);

void save_checkpoint(const DsidModel& model, const std::filesystem::path& path);
DsidModel load_checkpoint(const std::filesystem::path& path);

}  // namespace dsid
