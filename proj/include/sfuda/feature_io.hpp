#pragma once

#include "sfuda/core.hpp"

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

namespace sfuda::io {

// SFDK v1 layout (little-endian):
//   "SFDK" | u32 version | u64 rows | u64 cols | u32 flags | f32[rows*cols] | i32[rows] if flags&1
inline constexpr std::size_t kSfdkHeaderBytes = 4 + 4 + 8 + 8 + 4;
inline constexpr std::uint32_t kSfdkVersion = 1;
inline constexpr std::uint32_t kFlagHasLabels = 1u;

/// Serialized SFDK image of a domain. Labels are written when any sample is labeled.
std::vector<std::uint8_t> encode_sfdk(const LabeledDomain& domain);

/// Parses an SFDK image. num_classes is 1 + the largest label (1 when unlabeled).
LabeledDomain decode_sfdk(std::span<const std::uint8_t> bytes);

LabeledDomain read_sfdk(const std::filesystem::path& path);
void write_sfdk(const LabeledDomain& domain, const std::filesystem::path& path);

/// Header "f0,...,f{D-1},label"; empty label field means unlabeled.
LabeledDomain parse_csv(std::string_view text);
LabeledDomain read_csv(const std::filesystem::path& path);

/// Dispatches on extension: ".csv" goes through read_csv, anything else through read_sfdk.
LabeledDomain read_domain(const std::filesystem::path& path);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames over the destination.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

enum class Method { Lp, Cp, Sca, ShotLite, FtStats };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct ExperimentRecord {
  std::string id;
  std::string source_path;
  std::string target_path;
  Method method = Method::Lp;
  nlohmann::json method_params = nlohmann::json::object();
  std::uint64_t seed = 0;
};

inline constexpr std::string_view kManifestHeader = R"({"sfuda_manifest":1})";

/// JSON Lines: a header line {"sfuda_manifest":1}, then one record object per line.
/// Blank lines are skipped.
std::vector<ExperimentRecord> parse_manifest(std::string_view text);
std::string format_manifest(const std::vector<ExperimentRecord>& records);

}  // namespace sfuda::io
