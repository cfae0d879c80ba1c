#pragma once

// Minimal CSV writing (RFC-4180 quoting, full double precision). Trace files
// are byte-deterministic for a given config and seed; wall-clock timings go
// to the separate solver log only.

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace pushmpc {

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns)
      : out_(path), ncols_(columns.size()) {
    if (!out_) throw std::runtime_error("cannot open for writing: " + path);
    for (std::size_t i = 0; i < columns.size(); ++i) {
      out_ << quote(columns[i]) << (i + 1 < columns.size() ? "," : "\n");
    }
  }

  void field(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    put(buf);
  }
  void field(int v) { put(std::to_string(v)); }
  void field(long v) { put(std::to_string(v)); }
  void field(const std::string& s) { put(quote(s)); }

  void end_row() {
    out_ << "\n";
    col_ = 0;
  }

  void flush() { out_.flush(); }

 private:
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
      if (ch == '"') q += '"';
      q += ch;
    }
    q += '"';
    return q;
  }

  void put(const std::string& s) {
    if (col_ > 0) out_ << ",";
    out_ << s;
    ++col_;
  }

  std::ofstream out_;
  std::size_t ncols_;
  std::size_t col_{0};
};

}  // namespace pushmpc
