#include "agglomg/common.hpp"

namespace agglomg {

Csr Csr::from_pairs(Index rows, std::span<const std::pair<Index, Index>> pairs) {
  Csr out;
  out.offsets_.assign(static_cast<std::size_t>(rows) + 1, 0);
  for (const auto& [r, v] : pairs) ++out.offsets_[r + 1];
  for (Index r = 0; r < rows; ++r) out.offsets_[r + 1] += out.offsets_[r];
  out.values_.resize(pairs.size());
  std::vector<Index> cursor(out.offsets_.begin(), out.offsets_.end() - 1);
  for (const auto& [r, v] : pairs) out.values_[cursor[r]++] = v;
  return out;
}

Csr Csr::transpose(Index columns) const {
  Csr out;
  out.offsets_.assign(static_cast<std::size_t>(columns) + 1, 0);
  for (Index v : values_) ++out.offsets_[v + 1];
  for (Index c = 0; c < columns; ++c) out.offsets_[c + 1] += out.offsets_[c];
  out.values_.resize(values_.size());
  std::vector<Index> cursor(out.offsets_.begin(), out.offsets_.end() - 1);
  for (Index r = 0; r < size(); ++r) {
    for (Index v : (*this)[r]) out.values_[cursor[v]++] = r;
  }
  return out;
}

}  // namespace agglomg
