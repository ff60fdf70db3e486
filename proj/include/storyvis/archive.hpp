#ifndef STORYVIS_ARCHIVE_HPP_
#define STORYVIS_ARCHIVE_HPP_

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "storyvis/tensor.hpp"

namespace storyvis {

// Named float64 arrays plus free-form JSON metadata, stored as
//
//   bytes 0..7    magic "SVARCH01"
//   bytes 8..15   header length N, uint64 little-endian
//   bytes 16..    N bytes of UTF-8 JSON:
//                 {"arrays":[{"name":..,"shape":[r,c],"offset":o},..],"meta":{..}}
//   then          payload; array data is row-major float64 little-endian at
//                 byte `offset` from the payload start
//
// Arrays are written in name order, so identical contents give identical
// bytes. Used for both parameter checkpoints and preprocessed story packs.
struct TensorArchive {
  std::map<std::string, Matrix> arrays;
  nlohmann::json meta = nlohmann::json::object();
};

class ArchiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive read_archive(const std::filesystem::path& path);

}  // namespace storyvis

#endif  // STORYVIS_ARCHIVE_HPP_
