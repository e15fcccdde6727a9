#include "gmix/block_index.hpp"

#include <algorithm>
#include <string>
#include <utility>

#include "gmix/errors.hpp"

namespace gmix {

namespace {

Eigen::VectorXd select(const Eigen::VectorXd& v, const std::vector<int>& idx) {
  Eigen::VectorXd out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = v[idx[i]];
  }
  return out;
}

Eigen::MatrixXd block(const Eigen::MatrixXd& m, const std::vector<int>& rows,
                      const std::vector<int>& cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          m(rows[r], cols[c]);
    }
  }
  return out;
}

}  // namespace

BlockIndex::BlockIndex(std::vector<int> x_dims, std::vector<int> y_dims)
    : x_dims_(std::move(x_dims)), y_dims_(std::move(y_dims)) {
  if (x_dims_.empty() || y_dims_.empty()) {
    throw ValidationError("block index: both blocks must be nonempty");
  }
  std::vector<int> all = x_dims_;
  all.insert(all.end(), y_dims_.begin(), y_dims_.end());
  std::vector<int> sorted = all;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] != static_cast<int>(i)) {
      throw ValidationError(
          "block index: blocks must disjointly cover 0.." +
          std::to_string(all.size() - 1));
    }
  }
}

Eigen::VectorXd BlockIndex::selectX(const Eigen::VectorXd& v) const {
  return select(v, x_dims_);
}

Eigen::VectorXd BlockIndex::selectY(const Eigen::VectorXd& v) const {
  return select(v, y_dims_);
}

Eigen::MatrixXd BlockIndex::blockXX(const Eigen::MatrixXd& m) const {
  return block(m, x_dims_, x_dims_);
}

Eigen::MatrixXd BlockIndex::blockXY(const Eigen::MatrixXd& m) const {
  return block(m, x_dims_, y_dims_);
}

Eigen::MatrixXd BlockIndex::blockYX(const Eigen::MatrixXd& m) const {
  return block(m, y_dims_, x_dims_);
}

Eigen::MatrixXd BlockIndex::blockYY(const Eigen::MatrixXd& m) const {
  return block(m, y_dims_, y_dims_);
}

}  // namespace gmix
