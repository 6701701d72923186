#include "tvp/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "tvp/error.hpp"

namespace tvp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path strip_extension(const fs::path& base) {
  const auto ext = base.extension();
  if (ext == ".raw" || ext == ".json") return fs::path(base).replace_extension();
  return base;
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big)
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  return v;
}

void write_payload(const fs::path& path, std::span<const double> values) {
  std::string bytes(values.size() * 4, '\0');
  for (std::size_t n = 0; n < values.size(); ++n) {
    const auto bits = to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(values[n])));
    std::memcpy(bytes.data() + 4 * n, &bits, 4);
  }
  write_text_atomic(path, bytes);
}

std::vector<double> read_payload(const fs::path& path, std::size_t count) {
  const std::string bytes = read_text(path);
  if (bytes.size() < count * 4)
    throw FormatError("payload: truncated, expected " + std::to_string(count) + " values but file holds " +
                      std::to_string(bytes.size() / 4));
  if (bytes.size() != count * 4)
    throw FormatError("payload: " + std::to_string(bytes.size() - count * 4) + " trailing bytes after " +
                      std::to_string(count) + " values");
  std::vector<double> out(count);
  for (std::size_t n = 0; n < count; ++n) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, bytes.data() + 4 * n, 4);
    const float v = std::bit_cast<float>(to_little_endian(bits));
    if (!std::isfinite(v)) throw FormatError("payload: non-finite value at index " + std::to_string(n));
    out[n] = v;
  }
  return out;
}

json parse_header(const fs::path& path, std::string_view expected_type, const std::set<std::string>& allowed) {
  json h;
  try {
    h = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw FormatError("header: not valid JSON (" + std::string(e.what()) + ")");
  }
  if (!h.is_object()) throw FormatError("header: top level must be an object");
  if (!h.contains("type") || !h["type"].is_string()) throw FormatError("header: missing key `type`");
  if (h["type"].get<std::string>() != expected_type)
    throw FormatError("type: expected \"" + std::string(expected_type) + "\", got \"" +
                      h["type"].get<std::string>() + "\"");
  for (const auto& [key, _] : h.items())
    if (!allowed.contains(key)) throw FormatError("header: unknown key `" + key + "`");
  return h;
}

const json& require(const json& h, const char* key) {
  if (!h.contains(key)) throw FormatError(std::string("header: missing key `") + key + "`");
  return h[key];
}

std::vector<std::int64_t> int_array(const json& h, const char* key, std::size_t n) {
  const auto& v = require(h, key);
  if (!v.is_array() || v.size() != n) throw FormatError(std::string(key) + ": expected array of " + std::to_string(n));
  std::vector<std::int64_t> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) throw FormatError(std::string(key) + ": entries must be integers");
    out.push_back(e.get<std::int64_t>());
  }
  return out;
}

double number(const json& h, const char* key) {
  const auto& v = require(h, key);
  if (!v.is_number()) throw FormatError(std::string(key) + ": expected a number");
  return v.get<double>();
}

std::size_t positive_dim(std::int64_t v, const char* key) {
  if (v <= 0) throw FormatError(std::string(key) + ": every entry must be positive");
  return static_cast<std::size_t>(v);
}

} // namespace

fs::path header_path(const fs::path& base) {
  auto p = strip_extension(base);
  p += ".json";
  return p;
}

fs::path payload_path(const fs::path& base) {
  auto p = strip_extension(base);
  p += ".raw";
  return p;
}

void write_text_atomic(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open `" + tmp.string() + "` for writing");
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!os) throw FormatError("write to `" + tmp.string() + "` failed");
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open `" + path.string() + "` for reading");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_volume(const Volume& vol, const fs::path& base) {
  const auto& g = vol.grid();
  json h;
  h["type"] = "volume";
  h["dims"] = {g.dims.nx, g.dims.ny, g.dims.nz};
  h["voxel_size"] = g.voxel_size;
  h["origin"] = {g.origin[0], g.origin[1], g.origin[2]};
  write_payload(payload_path(base), vol.data());
  write_text_atomic(header_path(base), h.dump(2) + "\n");
}

Volume read_volume(const fs::path& base) {
  const json h = parse_header(header_path(base), "volume", {"type", "dims", "voxel_size", "origin"});
  const auto dims = int_array(h, "dims", 3);
  Grid g;
  g.dims = {positive_dim(dims[0], "dims"), positive_dim(dims[1], "dims"), positive_dim(dims[2], "dims")};
  g.voxel_size = number(h, "voxel_size");
  const auto& origin = require(h, "origin");
  if (!origin.is_array() || origin.size() != 3) throw FormatError("origin: expected array of 3");
  for (int a = 0; a < 3; ++a) {
    if (!origin[a].is_number()) throw FormatError("origin: entries must be numbers");
    g.origin[a] = origin[a].get<double>();
  }
  g.validate();
  return Volume(g, read_payload(payload_path(base), g.dims.size()));
}

void write_stack(const ProjectionStack& stack, const fs::path& base) {
  const auto& g = stack.geometry();
  json h;
  h["type"] = "stack";
  h["angles_deg"] = g.angles_deg;
  h["tilt_axis"] = g.axis == TiltAxis::x ? "x" : "y";
  h["detector_dims"] = {g.nu, g.nv};
  h["detector_pixel_size"] = g.pixel_size;
  write_payload(payload_path(base), stack.data());
  write_text_atomic(header_path(base), h.dump(2) + "\n");
}

ProjectionStack read_stack(const fs::path& base) {
  const json h = parse_header(header_path(base), "stack",
                              {"type", "angles_deg", "tilt_axis", "detector_dims", "detector_pixel_size"});
  TiltGeometry g;
  const auto& angles = require(h, "angles_deg");
  if (!angles.is_array() || angles.empty()) throw FormatError("angles_deg: expected non-empty array");
  for (const auto& a : angles) {
    if (!a.is_number()) throw FormatError("angles_deg: entries must be numbers");
    g.angles_deg.push_back(a.get<double>());
  }
  if (h.contains("tilt_axis")) {
    const auto& ax = h["tilt_axis"];
    if (!ax.is_string() || (ax != "x" && ax != "y")) throw FormatError("tilt_axis: expected \"x\" or \"y\"");
    g.axis = ax == "x" ? TiltAxis::x : TiltAxis::y;
  }
  const auto det = int_array(h, "detector_dims", 2);
  g.nu = positive_dim(det[0], "detector_dims");
  g.nv = positive_dim(det[1], "detector_dims");
  g.pixel_size = number(h, "detector_pixel_size");
  g.validate();
  const auto count = g.num_images() * g.pixels_per_image();
  return ProjectionStack(std::move(g), read_payload(payload_path(base), count));
}

} // namespace tvp
