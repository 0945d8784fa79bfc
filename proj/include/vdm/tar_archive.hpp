// Minimal POSIX ustar writer/reader for checkpoint archives. Member order is
// preserved and mtimes are zeroed so identical contents produce identical
// bytes.
#pragma once

#include <string>
#include <vector>

namespace vdm {

struct TarEntry {
  std::string name;
  std::string data;
};

void write_tar(const std::string& path, const std::vector<TarEntry>& entries);
std::vector<TarEntry> read_tar(const std::string& path);

}  // namespace vdm
