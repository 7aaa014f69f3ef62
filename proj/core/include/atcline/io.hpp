#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "atcline/errors.hpp"

namespace atcline {

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

// Splits on '\n', tolerating a trailing '\r' per line and a missing final
// newline. Empty trailing line is dropped.
std::vector<std::string> read_lines(const std::filesystem::path& path);
std::vector<std::string> split_lines(std::string_view text);

void write_binary_file(const std::filesystem::path& path,
                       const void* data, std::size_t size);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);

// Little-endian scalar append/read. All binary artifacts (sequences.bin,
// image tensors, checkpoints) go through these so files are portable.
inline void append_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void append_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void append_f64(std::vector<std::uint8_t>& buf, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  append_u64(buf, bits);
}

inline void append_f32(std::vector<std::uint8_t>& buf, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  append_u32(buf, bits);
}

class BinaryReader {
 public:
  BinaryReader(const std::uint8_t* data, std::size_t size)
      : data_(data), size_(size) {}
  explicit BinaryReader(const std::vector<std::uint8_t>& buf)
      : BinaryReader(buf.data(), buf.size()) {}

  std::uint32_t u32() {
    require(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    require(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }

  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  std::string str(std::size_t n) {
    require(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return size_ - pos_; }
  bool done() const { return pos_ == size_; }

 private:
  void require(std::size_t n) const {
    if (pos_ + n > size_) throw IoError("binary read past end of buffer");
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

// Writes to <path>.tmp and renames into place on commit(); the destructor
// removes the temp file if commit was never reached, so failed runs do not
// leave half-written outputs behind.
class OutputGuard {
 public:
  explicit OutputGuard(std::filesystem::path path)
      : path_(std::move(path)), tmp_(path_.string() + ".tmp") {}

  ~OutputGuard() {
    if (!committed_) {
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

  const std::filesystem::path& tmp_path() const { return tmp_; }

  void commit() {
    std::filesystem::rename(tmp_, path_);
    committed_ = true;
  }

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  bool committed_ = false;
};

}  // namespace atcline
