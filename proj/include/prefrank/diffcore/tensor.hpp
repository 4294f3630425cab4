#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace prefrank::diffcore {

using Index = Eigen::Index;

// Dense rank-2 array of doubles, row-major. Vectors are 1 x n or n x 1.
using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Shape {
  Index rows = 0;
  Index cols = 0;

  friend bool operator==(const Shape&, const Shape&) = default;
  std::string ToString() const;
};

inline Shape ShapeOf(const Tensor& t) { return {t.rows(), t.cols()}; }

class ShapeError : public std::invalid_argument {
 public:
  ShapeError(const std::string& op, Shape lhs, Shape rhs);
  ShapeError(const std::string& op, Shape shape, const std::string& what);
};

class NonFiniteError : public std::domain_error {
 public:
  explicit NonFiniteError(const std::string& where);
};

bool AllFinite(const Tensor& t);

// Throws NonFiniteError naming `where` if any entry is NaN or infinite.
void RequireFinite(const Tensor& t, const std::string& where);

Tensor FromRows(const std::vector<std::vector<double>>& rows);

}  // namespace prefrank::diffcore
