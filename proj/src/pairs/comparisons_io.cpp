#include "prefrank/pairs/comparisons_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace prefrank::pairs {

std::string FormatOutcome(double score) {
  if (score == 1.0) return "1";
  if (score == 0.5) return "0.5";
  if (score == 0.0) return "0";
  throw std::invalid_argument("outcome must be 1, 0.5 or 0");
}

void WriteComparisonsCsv(std::ostream& out, std::span<const rater::Comparison> comparisons) {
  out << "id_a,id_b,outcome\n";
  for (const auto& c : comparisons) out << c.a << ',' << c.b << ',' << FormatOutcome(c.score_a) << '\n';
}

namespace {

rater::ItemId ParseId(const std::string& field, std::size_t line) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (field.empty() || field[0] == '-') throw std::invalid_argument("negative");
    v = std::stoull(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != field.size()) {
    throw std::invalid_argument("comparisons line " + std::to_string(line) + ": bad item id \"" + field + "\"");
  }
  return static_cast<rater::ItemId>(v);
}

}  // namespace

std::vector<rater::Comparison> ReadComparisonsCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("comparisons: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id_a,id_b,outcome") {
    throw std::invalid_argument("comparisons: expected header id_a,id_b,outcome, got \"" + line + "\"");
  }
  std::vector<rater::Comparison> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a;
    std::string b;
    std::string s;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, s) ||
        s.find(',') != std::string::npos) {
      throw std::invalid_argument("comparisons line " + std::to_string(line_no) + ": expected 3 fields");
    }
    double score = -1.0;
    if (s == "1") score = 1.0;
    else if (s == "0.5") score = 0.5;
    else if (s == "0") score = 0.0;
    else throw std::invalid_argument("comparisons line " + std::to_string(line_no) + ": bad outcome \"" + s + "\"");
    out.push_back(rater::Comparison::Make(ParseId(a, line_no), ParseId(b, line_no), score));
  }
  return out;
}

void SaveComparisons(const std::string& path, std::span<const rater::Comparison> comparisons) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  WriteComparisonsCsv(out, comparisons);
}

std::vector<rater::Comparison> LoadComparisons(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return ReadComparisonsCsv(in);
}

}  // namespace prefrank::pairs
