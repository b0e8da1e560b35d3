#pragma once

#include <concepts>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace powerprint::text {

std::string_view trim(std::string_view s) noexcept;
std::vector<std::string_view> split(std::string_view s, char sep);
// The pieces would dangle.
template <typename S>
  requires std::same_as<S, std::string>
std::vector<std::string_view> split(S&& s, char sep) = delete;

/// Strict full-string parses; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);
std::optional<std::uint64_t> parse_uint(std::string_view s);

/// Round-trip-safe decimal (17 significant digits).
std::string format_double(double v);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace powerprint::text
