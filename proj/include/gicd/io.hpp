// Copyright (c) 2026 gicd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <zlib.h>

#include "gicd/f32le.hpp"
#include "gicd/serialize.hpp"
#include "gicd/signal.hpp"

namespace gicd {

// File layout for volumes and sinograms: one JSON header line terminated by
// '\n', then the raw little-endian f32 payload. Volumes run x fastest, then
// y, then z; sinograms run column fastest, then row, then view.

namespace detail {

inline void write_file_atomic(const std::string& path,
                              const std::string& header,
                              const Eigen::ArrayXf& payload) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp";
  {
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    require(f != nullptr, "cannot open '", tmp.string(), "' for writing");
    bool ok = std::fwrite(header.data(), 1, header.size(), f) == header.size();
    ok = ok && std::fwrite(payload.data(), sizeof(float),
                           static_cast<std::size_t>(payload.size()),
                           f) == static_cast<std::size_t>(payload.size());
    ok = (std::fclose(f) == 0) && ok;
    if (!ok) {
      std::error_code ec;
      fs::remove(tmp, ec);
      fail("short write to '", tmp.string(), "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  require(!ec, "cannot rename '", tmp.string(), "' to '", path,
          "': ", ec.message());
}

struct HeaderAndPayload {
  json header;
  Eigen::ArrayXf payload;
  std::size_t header_bytes = 0;
};

inline HeaderAndPayload read_header_and_payload(const std::string& path,
                                                const std::string& want_type) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  require(f != nullptr, "cannot open '", path, "'");
  struct Closer {
    std::FILE* f;
    ~Closer() { std::fclose(f); }
  } closer{f};

  std::string header;
  for (;;) {
    const int c = std::fgetc(f);
    require(c != EOF, "'", path, "': no header line (EOF at byte ",
            header.size(), ")");
    if (c == '\n') break;
    header.push_back(static_cast<char>(c));
    require(header.size() <= (16u << 20), "'", path,
            "': header exceeds 16 MiB, not a gicd file");
  }

  HeaderAndPayload out;
  out.header_bytes = header.size() + 1;
  try {
    out.header = json::parse(header);
  } catch (const json::parse_error& e) {
    fail("'", path, "': bad JSON header at byte ", e.byte, ": ", e.what());
  }
  const std::string type = out.header.value("type", "");
  require(type == want_type, "'", path, "': expected type '", want_type,
          "', got '", type, "'");

  std::error_code ec;
  const auto fsize = std::filesystem::file_size(path, ec);
  require(!ec, "cannot stat '", path, "'");
  const std::size_t avail = static_cast<std::size_t>(fsize) - out.header_bytes;
  require(avail % sizeof(float) == 0, "'", path, "': payload of ", avail,
          " bytes is not a whole number of f32 values");
  out.payload.resize(static_cast<Eigen::Index>(avail / sizeof(float)));
  const std::size_t got = std::fread(out.payload.data(), 1, avail, f);
  require(got == avail, "'", path, "': short payload read");
  return out;
}

}  // namespace detail

template <typename Scalar>
void write_volume(const Volume<Scalar>& vol, const std::string& path) {
  vol.validate();
  json h{{"type", "volume"},
         {"dims", vol.grid.dims},
         {"spacing_mm", vol.grid.spacing_mm},
         {"origin_mm", vol.grid.origin_mm},
         {"units", to_string(vol.units)}};
  if (vol.units == VolumeUnits::Normalized) {
    require(vol.norm_range.has_value(),
            "write_volume: normalized volume lacks norm_range");
    h["norm_range"] = *vol.norm_range;
  }
  detail::write_file_atomic(path, h.dump() + "\n",
                            vol.data.template cast<float>());
}

template <typename Scalar = double>
Volume<Scalar> read_volume(const std::string& path) {
  const auto [h, payload, header_bytes] =
      detail::read_header_and_payload(path, "volume");
  Volume<Scalar> vol;
  vol.grid.dims = h.at("dims").get<std::array<int, 3>>();
  vol.grid.spacing_mm = h.at("spacing_mm").get<std::array<double, 3>>();
  vol.grid.origin_mm = h.at("origin_mm").get<std::array<double, 3>>();
  vol.units = volume_units_from_string(h.at("units").get<std::string>());
  if (h.contains("norm_range"))
    vol.norm_range = h.at("norm_range").get<std::array<double, 2>>();
  require(!(vol.units == VolumeUnits::Normalized && !vol.norm_range),
          "'", path, "': normalized volume lacks norm_range");
  vol.grid.validate();
  const long expect = vol.grid.voxels();
  require(payload.size() == expect, "'", path, "': expected ",
          expect * sizeof(float), " payload bytes after the ", header_bytes,
          "-byte header, got ", payload.size() * sizeof(float));
  vol.data = payload.cast<Scalar>();
  vol.validate();
  return vol;
}

template <typename Scalar>
void write_sinogram(const Sinogram<Scalar>& sino, const std::string& path) {
  sino.validate();
  json h{{"type", "sinogram"},
         {"views", sino.views()},
         {"rows", sino.rows()},
         {"cols", sino.cols()},
         {"geometry", to_json(sino.geom)},
         {"units", to_string(sino.units)}};
  if (sino.units == SinoUnits::Normalized) {
    require(sino.norm_range.has_value(),
            "write_sinogram: normalized sinogram lacks norm_range");
    h["norm_range"] = *sino.norm_range;
  }
  detail::write_file_atomic(path, h.dump() + "\n",
                            sino.data.template cast<float>());
}

template <typename Scalar = double>
Sinogram<Scalar> read_sinogram(const std::string& path) {
  const auto [h, payload, header_bytes] =
      detail::read_header_and_payload(path, "sinogram");
  Sinogram<Scalar> sino;
  sino.geom = geometry_from_json(h.at("geometry"));
  sino.units = sino_units_from_string(h.at("units").get<std::string>());
  if (h.contains("norm_range"))
    sino.norm_range = h.at("norm_range").get<std::array<double, 2>>();
  require(!(sino.units == SinoUnits::Normalized && !sino.norm_range),
          "'", path, "': normalized sinogram lacks norm_range");
  require(h.at("views").get<int>() == sino.views() &&
              h.at("rows").get<int>() == sino.rows() &&
              h.at("cols").get<int>() == sino.cols(),
          "'", path, "': views/rows/cols disagree with the geometry");
  const long expect =
      static_cast<long>(sino.views()) * sino.rows() * sino.cols();
  require(payload.size() == expect, "'", path, "': expected ",
          expect * sizeof(float), " payload bytes after the ", header_bytes,
          "-byte header, got ", payload.size() * sizeof(float));
  sino.data = payload.cast<Scalar>();
  sino.validate();
  return sino;
}

// ---------------------------------------------------------------------------
// PNG export (8-bit grayscale, zlib-deflated)

namespace detail {

inline void png_chunk(std::string& out, const char type[4],
                      const std::string& data) {
  auto be32 = [](std::uint32_t v) {
    char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                 static_cast<char>(v >> 8), static_cast<char>(v)};
    return std::string(b, 4);
  };
  out += be32(static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  const auto crc =
      ::crc32(0, reinterpret_cast<const Bytef*>(body.data()), body.size());
  out += be32(static_cast<std::uint32_t>(crc));
}

inline void write_gray8_png(const std::string& path, int width, int height,
                            const std::vector<std::uint8_t>& pixels) {
  require(static_cast<long>(pixels.size()) ==
              static_cast<long>(width) * height,
          "png: pixel buffer size mismatch");
  std::string raw;
  raw.reserve(static_cast<std::size_t>(height) * (width + 1));
  for (int r = 0; r < height; ++r) {
    raw.push_back('\0');  // filter type 0 per scanline
    raw.append(reinterpret_cast<const char*>(&pixels[static_cast<std::size_t>(
                   r) * width]),
               width);
  }
  uLongf comp_size = ::compressBound(static_cast<uLong>(raw.size()));
  std::vector<Bytef> comp(comp_size);
  require(::compress2(comp.data(), &comp_size,
                      reinterpret_cast<const Bytef*>(raw.data()),
                      static_cast<uLong>(raw.size()), 6) == Z_OK,
          "png: deflate failed");

  std::string ihdr;
  auto be32 = [&](std::uint32_t v) {
    ihdr.push_back(static_cast<char>(v >> 24));
    ihdr.push_back(static_cast<char>(v >> 16));
    ihdr.push_back(static_cast<char>(v >> 8));
    ihdr.push_back(static_cast<char>(v));
  };
  be32(static_cast<std::uint32_t>(width));
  be32(static_cast<std::uint32_t>(height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(0);   // grayscale
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // no interlace

  std::string out("\x89PNG\r\n\x1a\n", 8);
  png_chunk(out, "IHDR", ihdr);
  png_chunk(out, "IDAT",
            std::string(reinterpret_cast<char*>(comp.data()), comp_size));
  png_chunk(out, "IEND", "");

  std::FILE* f = std::fopen(path.c_str(), "wb");
  require(f != nullptr, "cannot open '", path, "' for writing");
  const bool ok = std::fwrite(out.data(), 1, out.size(), f) == out.size();
  std::fclose(f);
  require(ok, "short write to '", path, "'");
}

}  // namespace detail

enum class SliceAxis { Axial, Coronal, Sagittal };

inline SliceAxis slice_axis_from_string(const std::string& s) {
  if (s == "axial") return SliceAxis::Axial;
  if (s == "coronal") return SliceAxis::Coronal;
  if (s == "sagittal") return SliceAxis::Sagittal;
  fail("unknown slice axis '", s, "' (want axial, coronal or sagittal)");
}

/// Writes one slice as an 8-bit grayscale PNG with a linear window/level
/// mapping: values at or below center - width/2 go to 0, at or above
/// center + width/2 to 255. Window values are in the volume's own units.
template <typename Scalar>
void export_slice_png(const Volume<Scalar>& vol, SliceAxis axis, int index,
                      double window_center, double window_width,
                      const std::string& path) {
  vol.validate();
  require(window_width > 0.0, "export_slice_png: window width must be > 0");
  const auto& d = vol.grid.dims;
  int width = 0, height = 0;
  switch (axis) {
    case SliceAxis::Axial:
      require(index >= 0 && index < d[2], "slice index ", index,
              " outside [0, ", d[2], ")");
      width = d[0];
      height = d[1];
      break;
    case SliceAxis::Coronal:
      require(index >= 0 && index < d[1], "slice index ", index,
              " outside [0, ", d[1], ")");
      width = d[0];
      height = d[2];
      break;
    case SliceAxis::Sagittal:
      require(index >= 0 && index < d[0], "slice index ", index,
              " outside [0, ", d[0], ")");
      width = d[1];
      height = d[2];
      break;
  }
  std::vector<std::uint8_t> img(static_cast<std::size_t>(width) * height);
  const double lo = window_center - 0.5 * window_width;
  auto shade = [&](double v) {
    double t = (v - lo) / window_width;
    t = std::min(1.0, std::max(0.0, t));
    return static_cast<std::uint8_t>(std::lround(t * 255.0));
  };
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      double v = 0.0;
      switch (axis) {
        case SliceAxis::Axial: v = vol.at(c, r, index); break;
        case SliceAxis::Coronal: v = vol.at(c, index, r); break;
        case SliceAxis::Sagittal: v = vol.at(index, c, r); break;
      }
      img[static_cast<std::size_t>(r) * width + c] = shade(v);
    }
  }
  detail::write_gray8_png(path, width, height, img);
}

}  // namespace gicd
