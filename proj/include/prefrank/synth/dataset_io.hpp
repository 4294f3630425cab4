#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "prefrank/diffcore/tensor.hpp"

namespace prefrank::synth {

// Features as CSV with header `id,feat_0,...,feat_{d-1}`; ids run 0..n-1 in
// order. Doubles are written with 17 significant digits, so a read after a
// write reproduces every value exactly.
void WriteFeaturesCsv(std::ostream& out, const diffcore::Tensor& features);
diffcore::Tensor ReadFeaturesCsv(std::istream& in);

// Hidden attribute as CSV with header `id,omega`. Kept in its own file so
// training code never sees it by accident.
void WriteOracleCsv(std::ostream& out, std::span<const double> omega);
std::vector<double> ReadOracleCsv(std::istream& in);

void SaveFeatures(const std::string& path, const diffcore::Tensor& features);
diffcore::Tensor LoadFeatures(const std::string& path);
void SaveOracle(const std::string& path, std::span<const double> omega);
std::vector<double> LoadOracle(const std::string& path);

// 17 significant digits, enough to round-trip any double.
std::string FormatDouble(double v);

}  // namespace prefrank::synth
