#include "kged/checkpoint.hpp"

#include "kged/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

namespace kged {

namespace {

constexpr char kMagic[4] = {'K', 'G', 'S', '1'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

template <typename T>
void put(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("checkpoint " + path.string() + ": truncated");
  return to_little(v);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<Tensor>& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  os.write(kMagic, 4);
  for (const auto& p : params) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name().size()));
    os.write(p.name().data(), static_cast<std::streamsize>(p.name().size()));
    put<std::uint32_t>(os, 2);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(p.rows()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(p.cols()));
    const Matrix& v = p.value();  // row-major storage already
    for (Index i = 0; i < v.size(); ++i) put<double>(os, v.data()[i]);
  }
  if (!os.flush()) throw DataError("failed writing checkpoint " + path.string());
}

std::vector<NamedMatrix> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("checkpoint " + path.string() + ": bad magic bytes");
  std::vector<NamedMatrix> out;
  while (is.peek() != std::char_traits<char>::eof()) {
    NamedMatrix entry;
    const auto len = get<std::uint32_t>(is, path);
    entry.name.resize(len);
    if (!is.read(entry.name.data(), len)) throw DataError("checkpoint " + path.string() + ": truncated name");
    const auto rank = get<std::uint32_t>(is, path);
    if (rank < 1 || rank > 2) throw DataError("checkpoint " + path.string() + ": unsupported rank " + std::to_string(rank));
    std::uint64_t dims[2] = {1, 1};
    for (std::uint32_t r = 0; r < rank; ++r) dims[rank == 1 ? 1 : r] = get<std::uint64_t>(is, path);
    entry.value.resize(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]));
    for (Index i = 0; i < entry.value.size(); ++i) entry.value.data()[i] = get<double>(is, path);
    out.push_back(std::move(entry));
  }
  return out;
}

void restore_checkpoint(const std::filesystem::path& path, std::vector<Tensor>& params) {
  std::map<std::string, Matrix> byname;
  for (auto& e : load_checkpoint(path)) byname[e.name] = std::move(e.value);
  for (auto& p : params) {
    auto it = byname.find(p.name());
    if (it == byname.end()) throw DataError("checkpoint " + path.string() + " lacks parameter '" + p.name() + "'");
    if (it->second.rows() != p.rows() || it->second.cols() != p.cols())
      throw DataError("checkpoint parameter '" + p.name() + "' has the wrong shape");
    p.mutable_value() = it->second;
  }
}

}  // namespace kged
