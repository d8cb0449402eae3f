#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "traitwave/core.hpp"

namespace traitwave::classical {

/// Dense row-major sample matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  template <class Row>
  static Matrix from_rows(const std::vector<Row>& rows) {
    Matrix m;
    if (rows.empty()) return m;
    m.cols_ = rows.front().size();
    for (const auto& r : rows) m.push_row(std::span<const double>(r.data(), r.size()));
    return m;
  }

  void push_row(std::span<const double> row) {
    if (rows_ == 0 && cols_ == 0) cols_ = row.size();
    if (row.size() != cols_) throw Error(ErrorCode::SchemaError, "row width mismatch");
    data_.insert(data_.end(), row.begin(), row.end());
    ++rows_;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

  Matrix select(std::span<const std::size_t> indices) const {
    Matrix m(indices.size(), cols_);
    for (std::size_t k = 0; k < indices.size(); ++k) {
      auto src = row(indices[k]);
      std::copy(src.begin(), src.end(), m.row(k).begin());
    }
    return m;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Binary labels, 0 or 1.
using Labels = std::vector<std::uint8_t>;

inline Labels select(const Labels& y, std::span<const std::size_t> indices) {
  Labels out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(y[i]);
  return out;
}

inline std::size_t count_positive(const Labels& y) {
  std::size_t n = 0;
  for (auto v : y) n += v ? 1 : 0;
  return n;
}

}  // namespace traitwave::classical
