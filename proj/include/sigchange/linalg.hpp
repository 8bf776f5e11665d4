#pragma once

// Dense vector/matrix aliases and the determinant used for metric work.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace sigchange {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Vec to_vec(std::span<const double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) v[static_cast<Eigen::Index>(i)] = values[i];
  return v;
}

inline std::vector<double> to_std(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

namespace linalg_detail {

inline double cofactor_det(const Mat& a, std::vector<int>& rows, int col) {
  const int n = static_cast<int>(a.cols());
  if (col == n - 1) return a(rows[0], col);
  double sum = 0.0;
  double sign = 1.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const int r = rows[k];
    rows.erase(rows.begin() + static_cast<std::ptrdiff_t>(k));
    if (a(r, col) != 0.0) sum += sign * a(r, col) * cofactor_det(a, rows, col + 1);
    rows.insert(rows.begin() + static_cast<std::ptrdiff_t>(k), r);
    sign = -sign;
  }
  return sum;
}

}  // namespace linalg_detail

/// Exact cofactor expansion up to 4x4 (so structurally zero entries stay
/// exactly zero), partial-pivot LU above.
inline double determinant(const Mat& a) {
  const auto n = a.rows();
  if (n == 0) return 1.0;
  if (n <= 4) {
    std::vector<int> rows;
    for (int i = 0; i < n; ++i) rows.push_back(i);
    return linalg_detail::cofactor_det(a, rows, 0);
  }
  return Eigen::PartialPivLU<Mat>(a).determinant();
}

}  // namespace sigchange
