#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "tvp/volume.hpp"

namespace tvp {

// On-disk containers are a pair `<base>.raw` (little-endian float32 payload)
// and `<base>.json` (header). `base` may be given with or without either
// extension. Values are stored as float32, so a round trip is bitwise exact
// for float-representable data (everything read from disk is).

void write_volume(const Volume& vol, const std::filesystem::path& base);
[[nodiscard]] Volume read_volume(const std::filesystem::path& base);

void write_stack(const ProjectionStack& stack, const std::filesystem::path& base);
[[nodiscard]] ProjectionStack read_stack(const std::filesystem::path& base);

// Writes through a sibling temp file followed by rename.
void write_text_atomic(const std::filesystem::path& path, std::string_view text);
[[nodiscard]] std::string read_text(const std::filesystem::path& path);

[[nodiscard]] std::filesystem::path header_path(const std::filesystem::path& base);
[[nodiscard]] std::filesystem::path payload_path(const std::filesystem::path& base);

} // namespace tvp
