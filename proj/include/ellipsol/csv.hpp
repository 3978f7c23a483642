#pragma once

#include <charconv>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <type_traits>

#include "ellipsol/error.hpp"

namespace ellipsol {

/// Shortest round-trip decimal for a double.
inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::initializer_list<std::string_view> header) : out_(path) {
    require(out_.good(), ErrorKind::InvalidArgument, "cannot open " + path);
    bool first = true;
    for (auto h : header) {
      if (!first) out_ << ',';
      out_ << h;
      first = false;
    }
    out_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((put(cells, first)), ...);
    out_ << '\n';
  }

 private:
  template <class T>
  void put(const T& v, bool& first) {
    if (!first) out_ << ',';
    first = false;
    if constexpr (std::is_floating_point_v<T>) out_ << format_double(v);
    else out_ << v;
  }

  std::ofstream out_;
};

}  // namespace ellipsol
