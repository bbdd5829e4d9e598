// Copyright (c) 2026 gicd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gicd/error.hpp"

namespace gicd {

static_assert(std::endian::native == std::endian::little,
              "raw payloads are little-endian; big-endian hosts unsupported");

inline void write_f32le(const std::string& path,
                        const Eigen::Ref<const Eigen::ArrayXf>& data) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  require(f != nullptr, "cannot open '", path, "' for writing");
  const std::size_t n = static_cast<std::size_t>(data.size());
  const std::size_t written = std::fwrite(data.data(), sizeof(float), n, f);
  std::fclose(f);
  require(written == n, "short write to '", path, "'");
}

inline Eigen::ArrayXf read_f32le(const std::string& path,
                                 Eigen::Index expected) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  require(!ec, "cannot stat '", path, "': ", ec.message());
  require(size == static_cast<std::uintmax_t>(expected) * sizeof(float),
          "'", path, "': expected ", expected * sizeof(float),
          " payload bytes, got ", size);
  std::FILE* f = std::fopen(path.c_str(), "rb");
  require(f != nullptr, "cannot open '", path, "'");
  Eigen::ArrayXf data(expected);
  const std::size_t got = std::fread(data.data(), sizeof(float),
                                     static_cast<std::size_t>(expected), f);
  std::fclose(f);
  require(got == static_cast<std::size_t>(expected), "short read from '", path,
          "'");
  return data;
}

}  // namespace gicd
