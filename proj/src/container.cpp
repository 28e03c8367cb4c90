#include "mjnd/container.hpp"

#include <cstring>
#include <fstream>

#include "mjnd/errors.hpp"

namespace mjnd {
namespace {

namespace fs = std::filesystem;

std::string padded_magic(std::string_view magic) {
  std::string m(magic.substr(0, 8));
  m.resize(8, '\0');
  return m;
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const fs::path& file) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("truncated artifact: " + file.string());
  return v;
}

struct Prefix {
  std::uint32_t version;
  nlohmann::json header;
};

Prefix read_prefix(std::istream& in, const fs::path& file, std::string_view magic) {
  std::string m(8, '\0');
  if (!in.read(m.data(), 8) || m != padded_magic(magic)) {
    throw IoError("not a " + std::string(magic) + " artifact: " + file.string());
  }
  const auto version = get<std::uint32_t>(in, file);
  if (version != kContainerVersion) {
    throw IoError("unsupported artifact version " + std::to_string(version) + ": " + file.string());
  }
  const auto len = get<std::uint64_t>(in, file);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
    throw IoError("truncated artifact header: " + file.string());
  }
  try {
    return {version, nlohmann::json::parse(text)};
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt artifact header in " + file.string() + ": " + e.what());
  }
}

}  // namespace

void write_container(const fs::path& file, std::string_view magic, const Container& c) {
  std::error_code ec;
  if (file.has_parent_path()) fs::create_directories(file.parent_path(), ec);
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    const std::string header = c.header.dump();
    out.write(padded_magic(magic).data(), 8);
    put<std::uint32_t>(out, kContainerVersion);
    put<std::uint64_t>(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(c.payload.data(), static_cast<std::streamsize>(c.payload.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, file, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

Container read_container(const fs::path& file, std::string_view magic) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  Container c;
  c.header = read_prefix(in, file, magic).header;
  c.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return c;
}

nlohmann::json read_container_header(const fs::path& file, std::string_view magic) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  return read_prefix(in, file, magic).header;
}

}  // namespace mjnd
