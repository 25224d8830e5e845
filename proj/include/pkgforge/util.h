#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pkgforge {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

/// 64-bit FNV-1a. `seed` lets callers chain several buffers into one digest.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = kFnvOffsetBasis);

/// Lowercase, zero-padded, 16 hex digits.
std::string to_hex64(std::uint64_t value);

std::string trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

/// Whitespace-token count ("Classic colorway appeal" -> 3).
std::size_t word_count(std::string_view s);

/// Lowercase, keep alphanumerics/spaces/hyphens, collapse whitespace.
/// Non-ASCII bytes are kept so UTF-8 titles do not normalize to nothing.
std::string normalize_label(std::string_view s);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Largest bracket-balanced `{...}` span in `text`, string-literal aware.
std::optional<std::string_view> extract_json_object(std::string_view text);

}  // namespace pkgforge
