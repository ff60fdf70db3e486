#ifndef STORYVIS_IMAGE_IO_HPP_
#define STORYVIS_IMAGE_IO_HPP_

#include <filesystem>

#include "storyvis/tensor.hpp"

namespace storyvis {

// Images are (H*W) x 3 matrices in [-1, 1], pixel (y, x) at row y*W + x.

// Binary PPM (P6, maxval 255). Values are clamped before quantizing.
void write_ppm(const std::filesystem::path& path, const Matrix& image, Index width, Index height);

// Reads a P6 file and resamples it (nearest neighbour) to side x side.
Matrix read_ppm(const std::filesystem::path& path, Index side);

}  // namespace storyvis

#endif  // STORYVIS_IMAGE_IO_HPP_
