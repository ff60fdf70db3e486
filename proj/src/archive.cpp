#include "storyvis/archive.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace storyvis {
namespace {

constexpr std::array<char, 8> kMagic = {'S', 'V', 'A', 'R', 'C', 'H', '0', '1'};

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
    return r;
  }
}

void put_u64(std::ostream& os, std::uint64_t v) {
  v = to_little(v);
  char buf[8];
  std::memcpy(buf, &v, 8);
  os.write(buf, 8);
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  std::memcpy(&v, p, 8);
  return to_little(v);
}

}  // namespace

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  nlohmann::json header;
  header["arrays"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, m] : archive.arrays) {
    header["arrays"].push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(m.size()) * 8;
  }
  header["meta"] = archive.meta;
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ArchiveError("cannot open '" + path.string() + "' for writing");
  os.write(kMagic.data(), kMagic.size());
  put_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, m] : archive.arrays) {
    for (Index i = 0; i < m.size(); ++i) put_u64(os, std::bit_cast<std::uint64_t>(m.data()[i]));
  }
  if (!os) throw ArchiveError("write to '" + path.string() + "' failed");
}

TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArchiveError("cannot open '" + path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw ArchiveError("'" + path.string() + "' is not a tensor archive");
  }
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  if (16 + header_len > bytes.size()) throw ArchiveError("'" + path.string() + "': truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ArchiveError("'" + path.string() + "': bad header: " + e.what());
  }
  const std::size_t payload = 16 + header_len;
  TensorArchive archive;
  archive.meta = header.value("meta", nlohmann::json::object());
  for (const auto& entry : header.at("arrays")) {
    const auto name = entry.at("name").get<std::string>();
    const auto rows = entry.at("shape").at(0).get<Index>();
    const auto cols = entry.at("shape").at(1).get<Index>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const std::uint64_t count = static_cast<std::uint64_t>(rows * cols);
    if (payload + offset + count * 8 > bytes.size()) {
      throw ArchiveError("'" + path.string() + "': array '" + name + "' runs past end of file");
    }
    Matrix m(rows, cols);
    const char* p = bytes.data() + payload + offset;
    for (std::uint64_t i = 0; i < count; ++i) m.data()[i] = std::bit_cast<double>(get_u64(p + 8 * i));
    archive.arrays.emplace(name, std::move(m));
  }
  return archive;
}

}  // namespace storyvis
