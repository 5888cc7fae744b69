#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qsdlab {

// Shortest round-trip decimal form; locale-free and stable across runs.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open output file: " + path.string());
  }

  void header(std::initializer_list<std::string_view> names) {
    bool first = true;
    for (const auto n : names) {
      if (!first) out_ << ',';
      out_ << n;
      first = false;
    }
    out_ << '\n';
  }

  template <typename... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    (write_cell(cells, first), ...);
    out_ << '\n';
  }

 private:
  template <typename T>
  void write_cell(const T& v, bool& first) {
    if (!first) out_ << ',';
    first = false;
    if constexpr (std::is_same_v<T, double>)
      out_ << format_double(v);
    else
      out_ << v;
  }

  std::ofstream out_;
};

}  // namespace qsdlab
