#include "storyvis/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace storyvis {

void write_ppm(const std::filesystem::path& path, const Matrix& image, Index width, Index height) {
  if (image.rows() != width * height || image.cols() != 3) {
    throw std::invalid_argument("write_ppm: image " + shape_string(image) + " does not match " +
                                std::to_string(width) + "x" + std::to_string(height));
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << "P6\n" << width << ' ' << height << "\n255\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(image.size()));
  for (Index r = 0; r < image.rows(); ++r) {
    for (Index c = 0; c < 3; ++c) {
      const double v = std::clamp((image(r, c) + 1.0) * 0.5, 0.0, 1.0);
      bytes[static_cast<std::size_t>(r * 3 + c)] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string header_token(std::istream& is) {
  std::string tok;
  for (;;) {
    const int c = is.get();
    if (c == EOF) break;
    if (c == '#' && tok.empty()) {
      std::string rest;
      std::getline(is, rest);
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace

Matrix read_ppm(const std::filesystem::path& path, Index side) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open image '" + path.string() + "'");
  if (header_token(is) != "P6") throw std::runtime_error(path.string() + ": not a binary PPM (P6)");
  Index w = 0;
  Index h = 0;
  int maxval = 0;
  try {
    w = std::stol(header_token(is));
    h = std::stol(header_token(is));
    maxval = std::stoi(header_token(is));
  } catch (const std::logic_error&) {
    throw std::runtime_error(path.string() + ": malformed PPM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) {
    throw std::runtime_error(path.string() + ": unsupported PPM dimensions or maxval");
  }
  std::vector<unsigned char> bytes(static_cast<std::size_t>(w * h * 3));
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (is.gcount() != static_cast<std::streamsize>(bytes.size())) throw std::runtime_error(path.string() + ": truncated");

  Matrix out(side * side, 3);
  for (Index y = 0; y < side; ++y) {
    const Index sy = y * h / side;
    for (Index x = 0; x < side; ++x) {
      const Index sx = x * w / side;
      for (Index c = 0; c < 3; ++c) {
        const double v = bytes[static_cast<std::size_t>((sy * w + sx) * 3 + c)] / static_cast<double>(maxval);
        out(y * side + x, c) = v * 2.0 - 1.0;
      }
    }
  }
  return out;
}

}  // namespace storyvis
