#include "skbf/io.hpp"

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "skbf/errors.hpp"

namespace skbf::io {

namespace fs = std::filesystem;

void write_file_atomic(const std::string& path, std::string_view content) {
  static std::atomic<unsigned> sequence{0};
  const fs::path target(path);
  std::error_code ec;
  if (target.has_parent_path()) fs::create_directories(target.parent_path(), ec);

  fs::path temp = target;
  temp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(sequence.fetch_add(1));
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + temp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write to " + temp.string() + " failed");
  }
  fs::rename(temp, target, ec);
  if (ec) {
    fs::remove(temp);
    throw IoError("cannot rename " + temp.string() + " to " + path + ": " + ec.message());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace skbf::io
