#include "sfuda/feature_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <system_error>

namespace sfuda::io {
namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  auto bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<U>(bytes[offset + i]) << (8 * i);
  }
  return std::bit_cast<T>(bits);
}

std::string_view trim_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no) {
  T value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  // from_chars rejects a leading '+'; accept it for hand-written files.
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || field.empty()) {
    throw Error(ErrorCode::UnparsableNumber,
                "'" + std::string(field) + "' on line " + std::to_string(line_no));
  }
  return value;
}

int infer_num_classes(const std::vector<int>& labels) {
  int max_label = kUnlabeled;
  for (int y : labels) max_label = std::max(max_label, y);
  return std::max(1, max_label + 1);
}

}  // namespace

std::vector<std::uint8_t> encode_sfdk(const LabeledDomain& domain) {
  validate_domain(domain);
  const bool has_labels = std::any_of(domain.labels.begin(), domain.labels.end(),
                                      [](int y) { return y != kUnlabeled; });
  const auto rows = static_cast<std::uint64_t>(domain.features.rows());
  const auto cols = static_cast<std::uint64_t>(domain.features.cols());

  std::vector<std::uint8_t> out;
  out.reserve(kSfdkHeaderBytes + rows * cols * 4 + (has_labels ? rows * 4 : 0));
  for (char ch : std::string_view("SFDK")) out.push_back(static_cast<std::uint8_t>(ch));
  put_le(out, kSfdkVersion);
  put_le(out, rows);
  put_le(out, cols);
  put_le(out, has_labels ? kFlagHasLabels : 0u);
  for (Eigen::Index i = 0; i < domain.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < domain.features.cols(); ++j) {
      const auto v = static_cast<float>(domain.features(i, j));
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFiniteValue, "value does not fit in 32-bit float");
      }
      put_le(out, v);
    }
  }
  if (has_labels) {
    for (int y : domain.labels) put_le(out, static_cast<std::int32_t>(y));
  }
  return out;
}

LabeledDomain decode_sfdk(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "SFDK", 4) != 0) {
    throw Error(ErrorCode::BadMagic, "missing SFDK magic");
  }
  if (bytes.size() < kSfdkHeaderBytes) {
    throw Error(ErrorCode::TruncatedPayload, "header is truncated");
  }
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kSfdkVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "version " + std::to_string(version));
  }
  const auto rows = get_le<std::uint64_t>(bytes, 8);
  const auto cols = get_le<std::uint64_t>(bytes, 16);
  const auto flags = get_le<std::uint32_t>(bytes, 24);
  if ((flags & ~kFlagHasLabels) != 0) {
    throw Error(ErrorCode::UnknownFlags, "flags 0x" + std::to_string(flags));
  }
  const bool has_labels = (flags & kFlagHasLabels) != 0;
  if (rows == 0 || cols == 0) throw Error(ErrorCode::EmptyInput, "zero rows or columns");

  // Compare sizes without overflow: every count must fit in what remains.
  const std::uint64_t available = bytes.size() - kSfdkHeaderBytes;
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  if (cols > kMax / rows || rows * cols > (kMax - rows) / 4) {
    throw Error(ErrorCode::TruncatedPayload, "declared size exceeds the file");
  }
  const std::uint64_t needed = rows * cols * 4 + (has_labels ? rows * 4 : 0);
  if (available < needed) {
    throw Error(ErrorCode::TruncatedPayload, "needs " + std::to_string(needed) +
                                                 " payload bytes, found " +
                                                 std::to_string(available));
  }
  if (available > needed) {
    throw Error(ErrorCode::TrailingBytes,
                std::to_string(available - needed) + " bytes past the declared payload");
  }

  LabeledDomain d;
  d.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::size_t offset = kSfdkHeaderBytes;
  for (Eigen::Index i = 0; i < d.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.features.cols(); ++j) {
      d.features(i, j) = get_le<float>(bytes, offset);
      offset += 4;
    }
  }
  d.labels.assign(rows, kUnlabeled);
  if (has_labels) {
    for (auto& y : d.labels) {
      y = get_le<std::int32_t>(bytes, offset);
      offset += 4;
      if (y < kUnlabeled) throw Error(ErrorCode::LabelOutOfRange, std::to_string(y));
    }
  }
  d.num_classes = infer_num_classes(d.labels);
  validate_domain(d);
  return d;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed: " + path.string());
  return bytes;
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::IoFailure, "cannot replace " + path.string());
  }
}

LabeledDomain read_sfdk(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return decode_sfdk(bytes);
}

void write_sfdk(const LabeledDomain& domain, const std::filesystem::path& path) {
  const auto bytes = encode_sfdk(domain);
  write_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

LabeledDomain parse_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t start = 0; start < text.size();) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(trim_cr(text.substr(start, end - start)));
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorCode::HeaderMismatch, "empty file");

  const auto header = split_commas(lines.front());
  if (header.size() < 2 || header.back() != "label") {
    throw Error(ErrorCode::HeaderMismatch, "last column must be 'label'");
  }
  const std::size_t dim = header.size() - 1;
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[j] != "f" + std::to_string(j)) {
      throw Error(ErrorCode::HeaderMismatch, "expected column f" + std::to_string(j) +
                                                 ", got '" + std::string(header[j]) + "'");
    }
  }

  const std::size_t n = lines.size() - 1;
  LabeledDomain d;
  d.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  d.labels.assign(n, kUnlabeled);
  for (std::size_t i = 0; i < n; ++i) {
    const auto fields = split_commas(lines[i + 1]);
    if (fields.size() != dim + 1) {
      throw Error(ErrorCode::RaggedRow, "line " + std::to_string(i + 2) + " has " +
                                            std::to_string(fields.size()) + " fields, expected " +
                                            std::to_string(dim + 1));
    }
    for (std::size_t j = 0; j < dim; ++j) {
      d.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          parse_number<double>(fields[j], i + 2);
    }
    if (!fields.back().empty()) d.labels[i] = parse_number<int>(fields.back(), i + 2);
  }
  if (n == 0) throw Error(ErrorCode::EmptyInput, "no data rows");
  d.num_classes = infer_num_classes(d.labels);
  validate_domain(d);
  return d;
}

LabeledDomain read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path)); }

LabeledDomain read_domain(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return read_csv(path);
  return read_sfdk(path);
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::Lp: return "lp";
    case Method::Cp: return "cp";
    case Method::Sca: return "sca";
    case Method::ShotLite: return "shot_lite";
    case Method::FtStats: return "ft_stats";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (auto m : {Method::Lp, Method::Cp, Method::Sca, Method::ShotLite, Method::FtStats}) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::UnknownMethod, std::string(name));
}

std::vector<ExperimentRecord> parse_manifest(std::string_view text) {
  using nlohmann::json;
  std::vector<ExperimentRecord> records;
  std::set<std::string> ids;
  bool saw_header = false;
  std::size_t line_no = 0;
  for (std::size_t start = 0; start <= text.size();) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim_cr(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    const auto where = "line " + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ManifestInvalid, where + ": " + e.what());
    }
    if (!saw_header) {
      if (!obj.is_object() || obj.value("sfuda_manifest", json()) != json(1)) {
        throw Error(ErrorCode::ManifestInvalid, where + ": expected header " +
                                                    std::string(kManifestHeader));
      }
      saw_header = true;
      continue;
    }
    if (!obj.is_object()) throw Error(ErrorCode::ManifestInvalid, where + ": not an object");
    try {
      ExperimentRecord r;
      r.id = obj.at("id").get<std::string>();
      r.source_path = obj.at("source_path").get<std::string>();
      r.target_path = obj.at("target_path").get<std::string>();
      r.method = parse_method(obj.at("method").get<std::string>());
      if (obj.contains("method_params")) r.method_params = obj.at("method_params");
      if (!r.method_params.is_object()) {
        throw Error(ErrorCode::ManifestInvalid, where + ": method_params must be an object");
      }
      const auto& seed = obj.at("seed");
      if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<long long>() >= 0)) {
        throw Error(ErrorCode::ManifestInvalid, where + ": seed must be an unsigned integer");
      }
      r.seed = seed.get<std::uint64_t>();
      if (r.id.empty() || r.source_path.empty() || r.target_path.empty()) {
        throw Error(ErrorCode::ManifestInvalid, where + ": id and paths must be non-empty");
      }
      if (!ids.insert(r.id).second) {
        throw Error(ErrorCode::ManifestInvalid, where + ": duplicate id '" + r.id + "'");
      }
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ManifestInvalid, where + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::UnknownMethod) {
        throw Error(ErrorCode::ManifestInvalid, where + ": " + e.what());
      }
      throw;
    }
  }
  if (!saw_header) throw Error(ErrorCode::ManifestInvalid, "missing header line");
  return records;
}

std::string format_manifest(const std::vector<ExperimentRecord>& records) {
  std::ostringstream out;
  out << kManifestHeader << '\n';
  for (const auto& r : records) {
    nlohmann::ordered_json obj;
    obj["id"] = r.id;
    obj["source_path"] = r.source_path;
    obj["target_path"] = r.target_path;
    obj["method"] = std::string(to_string(r.method));
    obj["method_params"] = r.method_params;
    obj["seed"] = r.seed;
    out << obj.dump() << '\n';
  }
  return out.str();
}

}  // namespace sfuda::io
