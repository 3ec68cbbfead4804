#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

namespace agglomg {

using Index = std::int32_t;

/// Marker for the missing neighbour of a boundary face.
inline constexpr Index kBoundary = -1;

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, Index>;
using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

class DegenerateElementError : public Error {
 public:
  DegenerateElementError(Index element, const std::string& what)
      : Error(what), element_(element) {}
  Index element() const { return element_; }

 private:
  Index element_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Compressed row storage of integer lists (element->faces, node->elements, ...).
class Csr {
 public:
  Csr() : offsets_{0} {}

  Index size() const { return static_cast<Index>(offsets_.size()) - 1; }
  bool empty() const { return size() == 0; }
  Index total() const { return offsets_.back(); }

  std::span<const Index> operator[](Index row) const {
    return {values_.data() + offsets_[row],
            static_cast<std::size_t>(offsets_[row + 1] - offsets_[row])};
  }
  Index degree(Index row) const { return offsets_[row + 1] - offsets_[row]; }

  void push_row(std::span<const Index> row) {
    values_.insert(values_.end(), row.begin(), row.end());
    offsets_.push_back(static_cast<Index>(values_.size()));
  }
  void push_row(std::initializer_list<Index> row) {
    push_row(std::span<const Index>(row.begin(), row.size()));
  }

  /// Build from (row, value) pairs; rows keep insertion order.
  static Csr from_pairs(Index rows, std::span<const std::pair<Index, Index>> pairs);

  /// Rows of the transpose relation: result[v] lists every row containing v.
  Csr transpose(Index columns) const;

  const std::vector<Index>& offsets() const { return offsets_; }
  const std::vector<Index>& values() const { return values_; }

 private:
  std::vector<Index> offsets_;
  std::vector<Index> values_;
};

}  // namespace agglomg
