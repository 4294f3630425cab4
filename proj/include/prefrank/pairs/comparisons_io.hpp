#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "prefrank/rater/types.hpp"

namespace prefrank::pairs {

// CSV with header `id_a,id_b,outcome`, outcome written as 1, 0.5 or 0.
void WriteComparisonsCsv(std::ostream& out, std::span<const rater::Comparison> comparisons);
std::vector<rater::Comparison> ReadComparisonsCsv(std::istream& in);

void SaveComparisons(const std::string& path, std::span<const rater::Comparison> comparisons);
std::vector<rater::Comparison> LoadComparisons(const std::string& path);

std::string FormatOutcome(double score);

}  // namespace prefrank::pairs
