// Copyright 2026 The covis Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "covis/volume/volume.hpp"

namespace covis {

class VolumeError : public std::runtime_error {
 public:
  enum class Kind { missing_file, malformed_header, length_mismatch, io };

  VolumeError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

inline std::vector<char> read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw VolumeError(VolumeError::Kind::missing_file, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename T>
T read_le(const char* src) {
  T v;
  std::memcpy(&v, src, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

inline Vec3 vec3_field(const nlohmann::json& h, const char* key) {
  const auto& a = h.at(key);
  if (!a.is_array() || a.size() != 3) throw std::invalid_argument(std::string(key) + " must have 3 entries");
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

}  // namespace detail

struct VolumeHeader {
  Dims dims{};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{};
  DType dtype{DType::u8};
  std::string raw;

  nlohmann::json to_json() const {
    return {{"dims", {dims[0], dims[1], dims[2]}},
            {"spacing_mm", {spacing.x, spacing.y, spacing.z}},
            {"origin_mm", {origin.x, origin.y, origin.z}},
            {"dtype", std::string(to_string(dtype))},
            {"raw", raw}};
  }
};

inline DType parse_dtype(const std::string& s) {
  if (s == "u8") return DType::u8;
  if (s == "u16") return DType::u16;
  if (s == "f32") return DType::f32;
  throw std::invalid_argument("unknown dtype '" + s + "'");
}

inline VolumeHeader parse_volume_header(const std::string& text) {
  try {
    const auto h = nlohmann::json::parse(text);
    VolumeHeader out;
    const auto& d = h.at("dims");
    if (!d.is_array() || d.size() != 3) throw std::invalid_argument("dims must have 3 entries");
    for (int a = 0; a < 3; ++a) {
      if (!d[a].is_number_integer()) throw std::invalid_argument("dims must be integers");
      out.dims[a] = d[a].get<int>();
      if (out.dims[a] < 1) throw std::invalid_argument("dims must be >= 1");
    }
    out.spacing = detail::vec3_field(h, "spacing_mm");
    if (!(out.spacing.x > 0 && out.spacing.y > 0 && out.spacing.z > 0))
      throw std::invalid_argument("spacing_mm must be positive");
    out.origin = detail::vec3_field(h, "origin_mm");
    out.dtype = parse_dtype(h.at("dtype").get<std::string>());
    out.raw = h.at("raw").get<std::string>();
    if (out.raw.empty()) throw std::invalid_argument("raw path is empty");
    return out;
  } catch (const VolumeError&) {
    throw;
  } catch (const std::exception& e) {
    throw VolumeError(VolumeError::Kind::malformed_header, std::string("malformed volume header: ") + e.what());
  }
}

/// Loads a volume from its JSON header; the raw path is resolved relative to the
/// header's directory. Integer samples are normalised by the dtype maximum, f32
/// samples are clamped into [0,1] and counted in Volume::clamped_samples.
inline Volume load_volume(const std::filesystem::path& header_path) {
  if (!std::filesystem::exists(header_path))
    throw VolumeError(VolumeError::Kind::missing_file, "header not found: " + header_path.string());
  const auto text = detail::read_all(header_path);
  const VolumeHeader hdr = parse_volume_header(std::string(text.begin(), text.end()));

  const auto raw_path = header_path.parent_path() / hdr.raw;
  if (!std::filesystem::exists(raw_path))
    throw VolumeError(VolumeError::Kind::missing_file, "raw file not found: " + raw_path.string());
  const auto bytes = detail::read_all(raw_path);

  Volume v(hdr.dims, hdr.spacing, hdr.origin, hdr.dtype);
  const std::size_t expected = v.voxel_count() * dtype_size(hdr.dtype);
  if (bytes.size() != expected) {
    std::ostringstream msg;
    msg << "raw length mismatch: expected " << expected << " bytes, found " << bytes.size();
    throw VolumeError(VolumeError::Kind::length_mismatch, msg.str());
  }

  const char* src = bytes.data();
  switch (hdr.dtype) {
    case DType::u8:
      for (std::size_t n = 0; n < v.data.size(); ++n)
        v.data[n] = static_cast<float>(static_cast<unsigned char>(src[n]) / 255.0);
      break;
    case DType::u16:
      for (std::size_t n = 0; n < v.data.size(); ++n)
        v.data[n] = static_cast<float>(detail::read_le<std::uint16_t>(src + 2 * n) / 65535.0);
      break;
    case DType::f32:
      for (std::size_t n = 0; n < v.data.size(); ++n) {
        float f = detail::read_le<float>(src + 4 * n);
        if (!(f >= 0.0f && f <= 1.0f)) {
          f = std::isnan(f) ? 0.0f : std::clamp(f, 0.0f, 1.0f);
          ++v.clamped_samples;
        }
        v.data[n] = f;
      }
      break;
  }
  return v;
}

inline std::uint8_t to_u8(double value) {
  const double scaled = std::floor(std::clamp(value, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(scaled);
}

/// FNV-1a 64 over the dims (three u32 LE) and the u8-quantised samples. Equal for a
/// volume and its save_volume_u8/load_volume round trip.
inline std::uint64_t volume_digest(const Volume& v) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto put = [&h](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (int a = 0; a < 3; ++a)
    for (int s = 0; s < 32; s += 8) put(static_cast<std::uint8_t>(static_cast<std::uint32_t>(v.dims[a]) >> s));
  for (float f : v.data) put(to_u8(f));
  return h;
}

/// Writes `dir/header.json` plus `dir/raw` as u8.
inline VolumeHeader save_volume_u8(const Volume& v, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  VolumeHeader hdr{v.dims, v.spacing, v.origin, DType::u8, "raw"};
  {
    std::ofstream out(dir / "raw", std::ios::binary);
    if (!out) throw VolumeError(VolumeError::Kind::io, "cannot write " + (dir / "raw").string());
    std::vector<char> bytes(v.data.size());
    std::transform(v.data.begin(), v.data.end(), bytes.begin(),
                   [](float f) { return static_cast<char>(to_u8(f)); });
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw VolumeError(VolumeError::Kind::io, "short write to " + (dir / "raw").string());
  }
  std::ofstream hout(dir / "header.json");
  if (!hout) throw VolumeError(VolumeError::Kind::io, "cannot write " + (dir / "header.json").string());
  hout << hdr.to_json().dump(2) << "\n";
  if (!hout) throw VolumeError(VolumeError::Kind::io, "short write to header.json");
  return hdr;
}

enum class ImageFormat { pgm, ppm };

inline std::string encode_pnm(const Image2D& img) {
  std::ostringstream out;
  if (img.kind == ImageKind::scalar_f32) {
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    for (float f : img.scalars) out.put(static_cast<char>(to_u8(f)));
  } else {
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  }
  return out.str();
}

/// Scalar images are written as P5, RGB images as P6. The requested format must
/// agree with the image kind.
inline void export_image(const Image2D& img, const std::filesystem::path& path, ImageFormat format) {
  const bool scalar = img.kind == ImageKind::scalar_f32;
  if (scalar != (format == ImageFormat::pgm))
    throw std::invalid_argument(scalar ? "scalar images export as pgm" : "rgb images export as ppm");
  const std::string bytes = encode_pnm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw VolumeError(VolumeError::Kind::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw VolumeError(VolumeError::Kind::io, "short write to " + path.string());
}

/// 8-bit pixels of a binary PGM/PPM file, as stored.
struct PnmImage {
  int width{0};
  int height{0};
  int channels{1};
  std::vector<std::uint8_t> pixels;

  bool operator==(const PnmImage&) const = default;
};

inline PnmImage parse_pnm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  in >> magic;
  PnmImage img;
  if (magic == "P5") img.channels = 1;
  else if (magic == "P6") img.channels = 3;
  else throw VolumeError(VolumeError::Kind::malformed_header, "not a binary PGM/PPM");
  auto next_int = [&]() {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
      in >> std::ws;
    }
    int v = -1;
    in >> v;
    if (!in) throw VolumeError(VolumeError::Kind::malformed_header, "bad PNM header");
    return v;
  };
  img.width = next_int();
  img.height = next_int();
  const int maxval = next_int();
  if (img.width < 1 || img.height < 1 || maxval != 255)
    throw VolumeError(VolumeError::Kind::malformed_header, "unsupported PNM geometry or maxval");
  in.get();  // single whitespace after maxval
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
  img.pixels.resize(n);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw VolumeError(VolumeError::Kind::length_mismatch, "truncated PNM payload");
  return img;
}

inline PnmImage read_pnm(const std::filesystem::path& path) {
  const auto bytes = detail::read_all(path);
  return parse_pnm(std::string(bytes.begin(), bytes.end()));
}

}  // namespace covis
