#pragma once

#include <charconv>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridars::csv {

// Shortest round-trip formatting: deterministic, lossless for binary64.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("csv: to_chars failed");
  return std::string(buf, ptr);
}

class Writer {
 public:
  explicit Writer(const std::string& path, bool append = false)
      : out_(path, append ? std::ios::app : std::ios::trunc) {
    if (!out_) throw std::runtime_error("csv: cannot open " + path);
  }

  void header(const std::vector<std::string>& names) { row_strings(names); }

  Writer& cell(const std::string& s) {
    if (!line_.empty()) line_ += ',';
    line_ += s;
    return *this;
  }
  Writer& cell(double v) { return cell(format_double(v)); }
  Writer& cell(long long v) { return cell(std::to_string(v)); }
  Writer& cell(int v) { return cell(std::to_string(v)); }

  void end_row() {
    out_ << line_ << '\n';
    line_.clear();
  }

  void row_strings(const std::vector<std::string>& cells) {
    for (const auto& c : cells) cell(c);
    end_row();
  }

 private:
  std::ofstream out_;
  std::string line_;
};

}  // namespace gridars::csv
