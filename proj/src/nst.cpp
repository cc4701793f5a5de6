#include "msga/nst.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "msga/error.hpp"

namespace msga::nst {

namespace {

constexpr char kMagic[4] = {'N', 'S', 'T', '1'};
constexpr std::uint32_t kMaxRank = 8;

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is, std::uint64_t& offset, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw FormatError(std::string("truncated file reading ") + what + " at byte offset " + std::to_string(offset));
  }
  offset += 4;
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

}  // namespace

void write(std::ostream& os, const Tensor& t) {
  if (t.rank() > kMaxRank) throw FormatError("rank " + std::to_string(t.rank()) + " exceeds NST limit");
  os.write(kMagic, 4);
  put_u32(os, std::uint32_t(t.rank()));
  for (auto d : t.shape()) put_u32(os, std::uint32_t(d));
  for (double v : t.values()) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

Tensor read(std::istream& is) {
  std::uint64_t offset = 0;
  char magic[4];
  if (!is.read(magic, 4)) throw FormatError("truncated file reading magic at byte offset 0");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic at byte offset 0 (expected NST1)");
  offset = 4;
  const std::uint32_t rank = get_u32(is, offset, "rank");
  if (rank == 0 || rank > kMaxRank) {
    throw FormatError("invalid rank " + std::to_string(rank) + " at byte offset 4");
  }
  Shape shape(rank);
  for (auto& d : shape) {
    const std::uint64_t at = offset;
    d = get_u32(is, offset, "dimension");
    if (d == 0) throw FormatError("zero dimension at byte offset " + std::to_string(at));
  }
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = double(std::bit_cast<float>(get_u32(is, offset, "value")));
  return Tensor(std::move(shape), std::move(values));
}

void save(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write(os, t);
  if (!os) throw IoError("write failed for " + path.string());
}

Tensor load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  try {
    return read(is);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + std::string(e.what()).substr(std::strlen("format error: ")));
  }
}

std::vector<char> encode(const Tensor& t) {
  std::ostringstream os(std::ios::binary);
  write(os, t);
  const std::string s = os.str();
  return {s.begin(), s.end()};
}

}  // namespace msga::nst
