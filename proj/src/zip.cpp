#include "aclear/zip.hpp"

#include <zlib.h>

#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>

#include "aclear/error.hpp"

namespace aclear {

namespace {

constexpr std::uint32_t kLocalHeaderSig = 0x04034b50;
constexpr std::uint32_t kCentralHeaderSig = 0x02014b50;
constexpr std::uint32_t kEndOfCentralSig = 0x06054b50;
constexpr std::uint16_t kVersion = 20;
constexpr std::uint16_t kUtf8Flag = 0x0800;
constexpr std::uint16_t kDosDate1980 = (0 << 9) | (1 << 5) | 1;

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t crc_of(std::string_view data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t pos = 0;
  while (pos < data.size()) {
    std::size_t chunk = std::min<std::size_t>(data.size() - pos, 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data() + pos), static_cast<uInt>(chunk));
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorCode::CorruptBundle, what); }

struct Reader {
  std::string_view bytes;

  std::uint16_t u16(std::size_t at) const {
    if (at + 2 > bytes.size()) corrupt("truncated archive");
    return static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[at]) |
                                      (static_cast<unsigned char>(bytes[at + 1]) << 8));
  }
  std::uint32_t u32(std::size_t at) const {
    return static_cast<std::uint32_t>(u16(at)) | (static_cast<std::uint32_t>(u16(at + 2)) << 16);
  }
  std::string_view slice(std::size_t at, std::size_t len) const {
    if (at > bytes.size() || len > bytes.size() - at) corrupt("truncated archive");
    return bytes.substr(at, len);
  }
};

std::string inflate_raw(std::string_view compressed, std::size_t expected) {
  std::string out(expected, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) corrupt("inflate init failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
  zs.avail_in = static_cast<uInt>(compressed.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = inflate(&zs, Z_FINISH);
  std::size_t produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) corrupt("deflate stream damaged");
  return out;
}

}  // namespace

std::string build_zip(const std::vector<ZipEntry>& entries) {
  std::string out;
  std::string central;
  constexpr auto kMax = std::numeric_limits<std::uint32_t>::max();
  for (const auto& entry : entries) {
    if (entry.data.size() >= kMax || entry.name.size() > 0xffff)
      throw Error(ErrorCode::IoError, "archive member too large: " + entry.name);
    const std::uint32_t offset = static_cast<std::uint32_t>(out.size());
    const std::uint32_t crc = crc_of(entry.data);
    const auto size = static_cast<std::uint32_t>(entry.data.size());
    const auto name_len = static_cast<std::uint16_t>(entry.name.size());

    put32(out, kLocalHeaderSig);
    put16(out, kVersion);
    put16(out, kUtf8Flag);
    put16(out, 0);  // stored
    put16(out, 0);  // time
    put16(out, kDosDate1980);
    put32(out, crc);
    put32(out, size);
    put32(out, size);
    put16(out, name_len);
    put16(out, 0);
    out += entry.name;
    out += entry.data;

    put32(central, kCentralHeaderSig);
    put16(central, kVersion);
    put16(central, kVersion);
    put16(central, kUtf8Flag);
    put16(central, 0);
    put16(central, 0);
    put16(central, kDosDate1980);
    put32(central, crc);
    put32(central, size);
    put32(central, size);
    put16(central, name_len);
    put16(central, 0);  // extra
    put16(central, 0);  // comment
    put16(central, 0);  // disk
    put16(central, 0);  // internal attrs
    put32(central, 0);  // external attrs
    put32(central, offset);
    central += entry.name;
    if (out.size() >= kMax) throw Error(ErrorCode::IoError, "archive exceeds 4 GiB");
  }
  if (entries.size() > 0xffff) throw Error(ErrorCode::IoError, "too many archive members");
  const auto cd_offset = static_cast<std::uint32_t>(out.size());
  out += central;
  put32(out, kEndOfCentralSig);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put32(out, static_cast<std::uint32_t>(central.size()));
  put32(out, cd_offset);
  put16(out, 0);
  return out;
}

std::vector<ZipEntry> parse_zip(std::string_view bytes) {
  Reader r{bytes};
  if (bytes.size() < 22) corrupt("not a zip archive");
  std::size_t eocd = std::string_view::npos;
  const std::size_t lowest = bytes.size() > 22 + 0xffff ? bytes.size() - 22 - 0xffff : 0;
  for (std::size_t at = bytes.size() - 22 + 1; at-- > lowest;) {
    if (r.u32(at) == kEndOfCentralSig) {
      eocd = at;
      break;
    }
  }
  if (eocd == std::string_view::npos) corrupt("end of central directory not found");
  const std::uint16_t count = r.u16(eocd + 10);
  std::size_t at = r.u32(eocd + 16);

  std::vector<ZipEntry> entries;
  entries.reserve(count);
  for (std::uint16_t i = 0; i < count; ++i) {
    if (r.u32(at) != kCentralHeaderSig) corrupt("bad central directory header");
    const std::uint16_t flags = r.u16(at + 8);
    const std::uint16_t method = r.u16(at + 10);
    const std::uint32_t crc = r.u32(at + 16);
    const std::uint32_t csize = r.u32(at + 20);
    const std::uint32_t usize = r.u32(at + 24);
    const std::uint16_t name_len = r.u16(at + 28);
    const std::uint16_t extra_len = r.u16(at + 30);
    const std::uint16_t comment_len = r.u16(at + 32);
    const std::uint32_t local = r.u32(at + 42);
    std::string name(r.slice(at + 46, name_len));
    at += 46 + name_len + extra_len + comment_len;

    if (flags & 0x1) corrupt("encrypted member: " + name);
    if (r.u32(local) != kLocalHeaderSig) corrupt("bad local header for " + name);
    const std::size_t data_at = local + 30 + r.u16(local + 26) + r.u16(local + 28);
    std::string_view raw = r.slice(data_at, csize);

    ZipEntry entry{std::move(name), {}};
    if (method == 0) {
      if (csize != usize) corrupt("size mismatch for " + entry.name);
      entry.data.assign(raw);
    } else if (method == 8) {
      entry.data = inflate_raw(raw, usize);
    } else {
      corrupt("unsupported compression method for " + entry.name);
    }
    if (crc_of(entry.data) != crc) corrupt("checksum mismatch for " + entry.name);
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace aclear
