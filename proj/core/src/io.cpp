#include "atcline/io.hpp"

namespace atcline {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path.string());
  std::string content((std::istreambuf_iterator<char>(f)),
                      std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("read failed: " + path.string());
  return content;
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '\n') {
      std::string_view line = text.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (i < text.size() || !line.empty()) lines.emplace_back(line);
      start = i + 1;
    }
  }
  return lines;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  return split_lines(read_text_file(path));
}

void write_binary_file(const std::filesystem::path& path,
                       const void* data, std::size_t size) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!f) throw IoError("write failed: " + path.string());
}

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path.string());
  f.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(f.tellg());
  f.seekg(0);
  std::vector<std::uint8_t> buf(size);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
  if (!f) throw IoError("read failed: " + path.string());
  return buf;
}

}  // namespace atcline
