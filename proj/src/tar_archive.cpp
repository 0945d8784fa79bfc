#include "vdm/tar_archive.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vdm {

namespace {

constexpr size_t kBlock = 512;

void write_octal(char* dst, size_t width, unsigned long long value) {
  // width-1 digits plus NUL terminator
  for (size_t i = width - 1; i-- > 0;) {
    dst[i] = char('0' + (value & 7));
    value >>= 3;
  }
  dst[width - 1] = '\0';
}

unsigned long long read_octal(const char* src, size_t width) {
  unsigned long long v = 0;
  for (size_t i = 0; i < width && src[i] >= '0' && src[i] <= '7'; ++i)
    v = (v << 3) | unsigned(src[i] - '0');
  return v;
}

}  // namespace

void write_tar(const std::string& path, const std::vector<TarEntry>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_tar: cannot open " + path);
  for (const auto& e : entries) {
    if (e.name.size() > 99)
      throw std::invalid_argument("write_tar: member name too long: " + e.name);
    char hdr[kBlock];
    std::memset(hdr, 0, kBlock);
    std::memcpy(hdr, e.name.c_str(), e.name.size());
    write_octal(hdr + 100, 8, 0644);          // mode
    write_octal(hdr + 108, 8, 0);             // uid
    write_octal(hdr + 116, 8, 0);             // gid
    write_octal(hdr + 124, 12, e.data.size());
    write_octal(hdr + 136, 12, 0);            // mtime: fixed for determinism
    std::memset(hdr + 148, ' ', 8);           // checksum placeholder
    hdr[156] = '0';                           // regular file
    std::memcpy(hdr + 257, "ustar", 6);
    std::memcpy(hdr + 263, "00", 2);
    unsigned long long sum = 0;
    for (size_t i = 0; i < kBlock; ++i) sum += (unsigned char)hdr[i];
    write_octal(hdr + 148, 7, sum);
    hdr[155] = ' ';
    out.write(hdr, kBlock);
    out.write(e.data.data(), std::streamsize(e.data.size()));
    const size_t pad = (kBlock - e.data.size() % kBlock) % kBlock;
    static const char zeros[kBlock] = {};
    out.write(zeros, std::streamsize(pad));
  }
  static const char zeros[kBlock] = {};
  out.write(zeros, kBlock);
  out.write(zeros, kBlock);
  if (!out) throw std::runtime_error("write_tar: write failed for " + path);
}

std::vector<TarEntry> read_tar(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_tar: cannot open " + path);
  std::vector<TarEntry> entries;
  char hdr[kBlock];
  while (in.read(hdr, kBlock)) {
    bool all_zero = true;
    for (size_t i = 0; i < kBlock && all_zero; ++i) all_zero = hdr[i] == 0;
    if (all_zero) break;
    TarEntry e;
    e.name.assign(hdr, strnlen(hdr, 100));
    const auto size = read_octal(hdr + 124, 12);
    e.data.resize(size);
    if (!in.read(e.data.data(), std::streamsize(size)))
      throw std::runtime_error("read_tar: truncated member " + e.name);
    const size_t pad = (kBlock - size % kBlock) % kBlock;
    in.ignore(std::streamsize(pad));
    if (hdr[156] == '0' || hdr[156] == '\0') entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace vdm
