#include "prefrank/synth/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace prefrank::synth {

using diffcore::Index;
using diffcore::Tensor;

std::string FormatDouble(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("cannot write a non-finite value");
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string> SplitFields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

bool NextLine(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) return true;
  }
  return false;
}

double ParseDouble(const std::string& field, const std::string& what, std::size_t line) {
  double v = 0.0;
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw std::invalid_argument(what + " line " + std::to_string(line) + ": bad number \"" + field + "\"");
  }
  return v;
}

void ExpectId(const std::string& field, std::size_t expected, const std::string& what, std::size_t line) {
  if (field != std::to_string(expected)) {
    throw std::invalid_argument(what + " line " + std::to_string(line) + ": expected id " +
                                std::to_string(expected) + ", got \"" + field + "\"");
  }
}

}  // namespace

void WriteFeaturesCsv(std::ostream& out, const Tensor& features) {
  out << "id";
  for (Index j = 0; j < features.cols(); ++j) out << ",feat_" << j;
  out << '\n';
  for (Index i = 0; i < features.rows(); ++i) {
    out << i;
    for (Index j = 0; j < features.cols(); ++j) out << ',' << FormatDouble(features(i, j));
    out << '\n';
  }
}

Tensor ReadFeaturesCsv(std::istream& in) {
  const std::string what = "features";
  std::string line;
  if (!NextLine(in, line)) throw std::invalid_argument("features: missing header");
  const auto header = SplitFields(line);
  if (header.size() < 2 || header[0] != "id") throw std::invalid_argument("features: header must be id,feat_0,...");
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] != "feat_" + std::to_string(j - 1)) {
      throw std::invalid_argument("features: unexpected column \"" + header[j] + "\"");
    }
  }
  const auto dim = static_cast<Index>(header.size() - 1);
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (NextLine(in, line)) {
    ++line_no;
    const auto fields = SplitFields(line);
    if (fields.size() != header.size()) {
      throw std::invalid_argument("features line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields");
    }
    ExpectId(fields[0], rows, what, line_no);
    for (std::size_t j = 1; j < fields.size(); ++j) values.push_back(ParseDouble(fields[j], what, line_no));
    ++rows;
  }
  if (rows == 0) throw std::invalid_argument("features: no rows");
  Tensor out(static_cast<Index>(rows), dim);
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index j = 0; j < dim; ++j) out(i, j) = values[static_cast<std::size_t>(i * dim + j)];
  }
  return out;
}

void WriteOracleCsv(std::ostream& out, std::span<const double> omega) {
  out << "id,omega\n";
  for (std::size_t i = 0; i < omega.size(); ++i) out << i << ',' << FormatDouble(omega[i]) << '\n';
}

std::vector<double> ReadOracleCsv(std::istream& in) {
  const std::string what = "oracle";
  std::string line;
  if (!NextLine(in, line) || line != "id,omega") throw std::invalid_argument("oracle: header must be id,omega");
  std::vector<double> out;
  std::size_t line_no = 1;
  while (NextLine(in, line)) {
    ++line_no;
    const auto fields = SplitFields(line);
    if (fields.size() != 2) throw std::invalid_argument("oracle line " + std::to_string(line_no) + ": expected 2 fields");
    ExpectId(fields[0], out.size(), what, line_no);
    out.push_back(ParseDouble(fields[1], what, line_no));
  }
  if (out.empty()) throw std::invalid_argument("oracle: no rows");
  return out;
}

namespace {

std::ofstream OpenOut(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::ifstream OpenIn(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return in;
}

}  // namespace

void SaveFeatures(const std::string& path, const Tensor& features) {
  auto out = OpenOut(path);
  WriteFeaturesCsv(out, features);
}

Tensor LoadFeatures(const std::string& path) {
  auto in = OpenIn(path);
  return ReadFeaturesCsv(in);
}

void SaveOracle(const std::string& path, std::span<const double> omega) {
  auto out = OpenOut(path);
  WriteOracleCsv(out, omega);
}

std::vector<double> LoadOracle(const std::string& path) {
  auto in = OpenIn(path);
  return ReadOracleCsv(in);
}

}  // namespace prefrank::synth
