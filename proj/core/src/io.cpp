// Copyright Contributors to the svs project
// SPDX-License-Identifier: Apache-2.0
#include "svs/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace svs {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error(path + ": " + what);
}

// Reads the next whitespace-delimited token, skipping '#' comment lines.
// Comments of the form "# seed=<n>" are captured into `seed`.
std::string next_token(std::istream& in, std::optional<std::uint64_t>* seed) {
  std::string tok;
  for (;;) {
    int ch = in.peek();
    if (ch == EOF) return tok;
    if (std::isspace(ch)) {
      in.get();
      continue;
    }
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
      if (seed) {
        const auto pos = line.find("seed=");
        if (pos != std::string::npos) {
          try {
            *seed = std::stoull(line.substr(pos + 5));
          } catch (const std::exception&) {
            // Malformed seed comments are ignored.
          }
        }
      }
      continue;
    }
    break;
  }
  in >> tok;
  return tok;
}

}  // namespace

void write_ppm(const std::string& path, const Grid& rgb,
               std::optional<std::uint64_t> seed) {
  if (rgb.channels != 3)
    throw std::invalid_argument("write_ppm: grid must have 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out << "P6\n";
  if (seed) out << "# seed=" << *seed << "\n";
  out << rgb.width << " " << rgb.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(rgb.width) * 3);
  for (int y = 0; y < rgb.height; ++y) {
    for (int x = 0; x < rgb.width; ++x) {
      const double* p = rgb.pixel(x, y);
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(p[c], 0.0, 1.0);
        row[static_cast<size_t>(x) * 3 + c] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) fail(path, "write failed");
}

PpmImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  PpmImage result;
  const std::string magic = next_token(in, &result.seed);
  if (magic != "P6") fail(path, "not a binary PPM (expected P6)");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_token(in, &result.seed));
    height = std::stoi(next_token(in, &result.seed));
    maxval = std::stoi(next_token(in, &result.seed));
  } catch (const std::exception&) {
    fail(path, "malformed PPM header");
  }
  if (width <= 0 || height <= 0) fail(path, "invalid PPM dimensions");
  if (maxval != 255) fail(path, "unsupported PPM maxval (expected 255)");
  in.get();  // single whitespace after maxval
  result.image = Grid(width, height, 3);
  std::vector<unsigned char> row(static_cast<size_t>(width) * 3);
  for (int y = 0; y < height; ++y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
    if (!in) fail(path, "truncated PPM pixel data");
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c)
        result.image.at(x, y, c) = row[static_cast<size_t>(x) * 3 + c] / 255.0;
  }
  return result;
}

void write_pfm(const std::string& path, const Grid& gray) {
  if (gray.channels != 1)
    throw std::invalid_argument("write_pfm: grid must have 1 channel");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out << "Pf\n" << gray.width << " " << gray.height << "\n-1.0\n";
  std::vector<float> row(static_cast<size_t>(gray.width));
  for (int y = gray.height - 1; y >= 0; --y) {
    for (int x = 0; x < gray.width; ++x)
      row[static_cast<size_t>(x)] = static_cast<float>(gray.at(x, y));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) fail(path, "write failed");
}

Grid read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  const std::string magic = next_token(in, nullptr);
  if (magic != "Pf") fail(path, "not a grayscale PFM (expected Pf)");
  int width = 0, height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(next_token(in, nullptr));
    height = std::stoi(next_token(in, nullptr));
    scale = std::stod(next_token(in, nullptr));
  } catch (const std::exception&) {
    fail(path, "malformed PFM header");
  }
  if (width <= 0 || height <= 0) fail(path, "invalid PFM dimensions");
  if (scale >= 0.0) fail(path, "big-endian PFM not supported");
  in.get();  // single whitespace after scale
  Grid out(width, height, 1);
  std::vector<float> row(static_cast<size_t>(width));
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) fail(path, "truncated PFM pixel data");
    for (int x = 0; x < width; ++x) out.at(x, y) = row[static_cast<size_t>(x)];
  }
  return out;
}

}  // namespace svs
