#pragma once

#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "banditspec/errors.hpp"

namespace banditspec {

// Acceptance-length tables on disk:
//
//   arm,t,accepted_len
//   0,1,3
//   0,2,5
//   1,1,1
//   ...
//
// Arms are 0-based and contiguous; rounds t are 1-based and contiguous per
// arm; rows sorted by (arm, t); accepted_len in [1, L+1]. LF line endings.

inline std::vector<std::vector<int>> parse_acceptance_csv(std::istream& in, int L,
                                                          const std::string& source = "<stream>") {
  auto fail = [&](long line_no, const std::string& msg) -> void {
    throw ConfigError(source + ":" + std::to_string(line_no) + ": " + msg);
  };

  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) fail(1, "missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') fail(line_no, "CRLF line endings are not accepted");
  if (line != "arm,t,accepted_len") fail(line_no, "expected header 'arm,t,accepted_len'");

  std::vector<std::vector<int>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.back() == '\r') fail(line_no, "CRLF line endings are not accepted");
    std::istringstream fields(line);
    std::string a, t, y;
    if (!std::getline(fields, a, ',') || !std::getline(fields, t, ',') ||
        !std::getline(fields, y) || y.find(',') != std::string::npos) {
      fail(line_no, "expected three comma-separated fields");
    }
    long arm = 0, round = 0, len = 0;
    try {
      std::size_t pa = 0, pt = 0, py = 0;
      arm = std::stol(a, &pa);
      round = std::stol(t, &pt);
      len = std::stol(y, &py);
      if (pa != a.size() || pt != t.size() || py != y.size()) throw std::invalid_argument("");
    } catch (const std::logic_error&) {
      fail(line_no, "non-integer field");
    }
    if (len < 1 || len > L + 1) {
      fail(line_no, "accepted_len " + std::to_string(len) + " outside [1, " +
                        std::to_string(L + 1) + "]");
    }
    if (arm == static_cast<long>(rows.size())) {
      rows.emplace_back();
    } else if (arm != static_cast<long>(rows.size()) - 1) {
      fail(line_no, "arms must be contiguous from 0 and sorted");
    }
    if (round != static_cast<long>(rows.back().size()) + 1) {
      fail(line_no, "rounds must be contiguous from 1 and sorted within each arm");
    }
    rows.back().push_back(static_cast<int>(len));
  }
  if (rows.empty()) fail(line_no, "no data rows");
  return rows;
}

inline std::vector<std::vector<int>> load_acceptance_csv(const std::string& path, int L) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open acceptance table " + path);
  return parse_acceptance_csv(in, L, path);
}

inline void write_acceptance_csv(std::ostream& out, const std::vector<std::vector<int>>& rows) {
  out << "arm,t,accepted_len\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t t = 0; t < rows[i].size(); ++t) {
      out << i << ',' << (t + 1) << ',' << rows[i][t] << '\n';
    }
  }
}

}  // namespace banditspec
