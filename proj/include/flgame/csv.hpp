#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "flgame/errors.hpp"

namespace flgame {

// Shortest decimal representation that round-trips the exact double.
// Locale-free, so output files are byte-reproducible.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) throw ContractError("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

inline std::string format_u64(std::uint64_t v) {
  char buf[24];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Minimal CSV emitter: optional '#' comment lines, one header row, '\n' line
// endings throughout.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& comments,
            const std::string& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw ConfigError("CsvWriter: cannot open " + path);
    for (const auto& c : comments) out_ << "# " << c << '\n';
    out_ << header << '\n';
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

}  // namespace flgame
