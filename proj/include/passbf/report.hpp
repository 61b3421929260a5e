#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "passbf/batch.hpp"

namespace passbf {

struct SeriesPoint {
  std::string method;
  std::string x;
  double mean = 0.0;
  double stddev = 0.0;
  int count = 0;
};

struct SeriesInput {
  std::string x;     // sweep value label, e.g. "10" for P = 10 dBm
  std::string path;  // RunRecord CSV
};

/// Parses "x:path"; a bare path gets x = its position in the argument list.
inline SeriesInput parse_series_arg(const std::string& arg, size_t position) {
  const auto colon = arg.find(':');
  if (colon == std::string::npos) return {std::to_string(position), arg};
  if (colon == 0 || colon + 1 == arg.size()) throw InvalidInput("series argument must look like x:path");
  return {arg.substr(0, colon), arg.substr(colon + 1)};
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Aggregates sum_rate into (method, x) groups: mean, sample std, count. Rows
/// carrying an error are skipped. Every file must carry the RunRecord header.
inline std::vector<SeriesPoint> build_series(const std::vector<SeriesInput>& inputs) {
  struct Acc {
    std::vector<double> v;
  };
  std::vector<std::pair<std::string, std::string>> order;  // (method, x) first-seen order
  std::map<std::pair<std::string, std::string>, Acc> acc;
  for (const auto& in : inputs) {
    std::ifstream f(in.path);
    if (!f) throw InvalidInput("cannot open '" + in.path + "'");
    std::string line;
    if (!std::getline(f, line)) continue;  // empty file: nothing to add
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kRunRecordHeader) throw InvalidInput("schema mismatch in '" + in.path + "'");
    int lineno = 1;
    while (std::getline(f, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto cols = split_csv_line(line);
      if (cols.size() != 10) throw InvalidInput("bad row " + std::to_string(lineno) + " in '" + in.path + "'");
      if (!cols[9].empty()) continue;
      const auto key = std::make_pair(cols[2], in.x);
      if (!acc.count(key)) order.push_back(key);
      try {
        acc[key].v.push_back(std::stod(cols[3]));
      } catch (const std::exception&) {
        throw InvalidInput("bad sum_rate on row " + std::to_string(lineno) + " in '" + in.path + "'");
      }
    }
  }
  std::vector<SeriesPoint> out;
  for (const auto& key : order) {
    const auto& v = acc[key].v;
    SeriesPoint p{key.first, key.second, 0.0, 0.0, static_cast<int>(v.size())};
    for (double a : v) p.mean += a;
    p.mean /= v.size();
    double ss = 0.0;
    for (double a : v) ss += (a - p.mean) * (a - p.mean);
    p.stddev = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
    out.push_back(p);
  }
  return out;
}

inline constexpr const char* kSeriesHeader = "method,x,mean,std,count";

inline std::string series_to_csv(const std::vector<SeriesPoint>& pts) {
  std::string s = std::string(kSeriesHeader) + "\n";
  for (const auto& p : pts)
    s += p.method + "," + p.x + "," + format_double(p.mean) + "," + format_double(p.stddev) + "," +
         std::to_string(p.count) + "\n";
  return s;
}

}  // namespace passbf
