#include "prefrank/diffcore/tensor.hpp"

namespace prefrank::diffcore {

std::string Shape::ToString() const {
  return "[" + std::to_string(rows) + ", " + std::to_string(cols) + "]";
}

ShapeError::ShapeError(const std::string& op, Shape lhs, Shape rhs)
    : std::invalid_argument(op + ": shape mismatch " + lhs.ToString() + " vs " +
                            rhs.ToString()) {}

ShapeError::ShapeError(const std::string& op, Shape shape, const std::string& what)
    : std::invalid_argument(op + ": " + what + " (shape " + shape.ToString() + ")") {}

NonFiniteError::NonFiniteError(const std::string& where)
    : std::domain_error(where + ": non-finite value") {}

bool AllFinite(const Tensor& t) { return t.allFinite(); }

void RequireFinite(const Tensor& t, const std::string& where) {
  if (!t.allFinite()) throw NonFiniteError(where);
}

Tensor FromRows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Tensor(0, 0);
  const auto cols = static_cast<Index>(rows.front().size());
  Tensor t(static_cast<Index>(rows.size()), cols);
  for (Index r = 0; r < t.rows(); ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (static_cast<Index>(row.size()) != cols) {
      throw ShapeError("FromRows", Shape{1, static_cast<Index>(row.size())},
                       Shape{1, cols});
    }
    for (Index c = 0; c < cols; ++c) t(r, c) = row[static_cast<std::size_t>(c)];
  }
  return t;
}

}  // namespace prefrank::diffcore
