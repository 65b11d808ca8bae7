#pragma once

// Cell-centred scalar grids, face-centred staggered fields and the discrete
// difference operators acting on them.
//
// Storage: a ScalarGrid of width M and height N is an N x M row-major Eigen
// array, so cell (i, j) (x-index i, y-index j, both 0-based) sits at array
// position (j, i) and the x-index runs fastest in memory. Cell (i, j) is
// centred at (i + 1/2, j + 1/2); the grid size is 1.
//
// A StaggeredField stores the x-component on the M-1 interior vertical faces
// (i + 1, j + 1/2) and the y-component on the N-1 interior horizontal faces.
// Boundary faces are never stored and are treated as exactly zero by every
// operator. This gives homogeneous Neumann conditions for cell-centred data
// and zero Dirichlet conditions for a face component in its own direction.

#include <Eigen/Core>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace couplevar {

using Index = Eigen::Index;

template <typename Scalar>
using GridArray = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar = double>
class ScalarGrid {
 public:
  using Array = GridArray<Scalar>;

  ScalarGrid() = default;

  ScalarGrid(Index width, Index height, Scalar value = Scalar(0))
      : values_(Array::Constant(checked(height), checked(width), value)) {}

  /// Takes an N x M array (rows are y).
  explicit ScalarGrid(Array values) : values_(std::move(values)) {
    checked(values_.rows());
    checked(values_.cols());
  }

  Index width() const { return values_.cols(); }
  Index height() const { return values_.rows(); }
  Index size() const { return values_.size(); }

  Scalar operator()(Index i, Index j) const { return values_(j, i); }
  Scalar& operator()(Index i, Index j) { return values_(j, i); }

  const Array& array() const { return values_; }
  /// Writable view; the map cannot be resized, so dimensions stay fixed.
  Eigen::Map<Array> values() { return Eigen::Map<Array>(values_.data(), values_.rows(), values_.cols()); }

  const Scalar* data() const { return values_.data(); }
  Scalar* data() { return values_.data(); }

  bool same_shape(const ScalarGrid& other) const {
    return width() == other.width() && height() == other.height();
  }

  ScalarGrid& operator+=(const ScalarGrid& o) { require_shape(o); values_ += o.values_; return *this; }
  ScalarGrid& operator-=(const ScalarGrid& o) { require_shape(o); values_ -= o.values_; return *this; }
  ScalarGrid& operator*=(Scalar s) { values_ *= s; return *this; }

  friend ScalarGrid operator+(ScalarGrid a, const ScalarGrid& b) { return a += b; }
  friend ScalarGrid operator-(ScalarGrid a, const ScalarGrid& b) { return a -= b; }
  friend ScalarGrid operator*(Scalar s, ScalarGrid a) { return a *= s; }

  void require_shape(const ScalarGrid& o) const {
    if (!same_shape(o)) {
      throw std::invalid_argument("grid shape mismatch: " + shape_string() + " vs " + o.shape_string());
    }
  }

  std::string shape_string() const { return std::to_string(width()) + "x" + std::to_string(height()); }

 private:
  static Index checked(Index n) {
    if (n < 1) throw std::invalid_argument("grid dimensions must be positive");
    return n;
  }

  Array values_;
};

/// Face-centred vector field companion to an M x N ScalarGrid.
template <typename Scalar = double>
class StaggeredField {
 public:
  using Array = GridArray<Scalar>;

  StaggeredField() = default;

  /// Zero field for an M x N cell grid.
  StaggeredField(Index width, Index height)
      : x_(Array::Zero(height, width - 1)), y_(Array::Zero(height - 1, width)) {
    if (width < 1 || height < 1) throw std::invalid_argument("grid dimensions must be positive");
  }

  /// x: N x (M-1), y: (N-1) x M.
  StaggeredField(Array x, Array y) : x_(std::move(x)), y_(std::move(y)) {
    if (y_.cols() < 1 || x_.rows() < 1 || x_.cols() != y_.cols() - 1 || y_.rows() != x_.rows() - 1) {
      throw std::invalid_argument("inconsistent staggered component shapes");
    }
  }

  /// Cell-grid width M and height N this field belongs to.
  Index width() const { return y_.cols(); }
  Index height() const { return x_.rows(); }
  Index size() const { return x_.size() + y_.size(); }

  /// x-component on face (i + 1, j + 1/2), i in [0, M-1).
  Scalar x(Index i, Index j) const { return x_(j, i); }
  Scalar& x(Index i, Index j) { return x_(j, i); }
  /// y-component on face (i + 1/2, j + 1), j in [0, N-1).
  Scalar y(Index i, Index j) const { return y_(j, i); }
  Scalar& y(Index i, Index j) { return y_(j, i); }

  const Array& x_array() const { return x_; }
  const Array& y_array() const { return y_; }
  Eigen::Map<Array> x_values() { return Eigen::Map<Array>(x_.data(), x_.rows(), x_.cols()); }
  Eigen::Map<Array> y_values() { return Eigen::Map<Array>(y_.data(), y_.rows(), y_.cols()); }

  bool matches(Index width, Index height) const { return this->width() == width && this->height() == height; }
  bool same_shape(const StaggeredField& o) const { return matches(o.width(), o.height()); }

  void require_shape(const StaggeredField& o) const {
    if (!same_shape(o)) throw std::invalid_argument("staggered field shape mismatch");
  }

  StaggeredField& operator+=(const StaggeredField& o) { require_shape(o); x_ += o.x_; y_ += o.y_; return *this; }
  StaggeredField& operator-=(const StaggeredField& o) { require_shape(o); x_ -= o.x_; y_ -= o.y_; return *this; }
  StaggeredField& operator*=(Scalar s) { x_ *= s; y_ *= s; return *this; }

  friend StaggeredField operator+(StaggeredField a, const StaggeredField& b) { return a += b; }
  friend StaggeredField operator-(StaggeredField a, const StaggeredField& b) { return a -= b; }
  friend StaggeredField operator*(Scalar s, StaggeredField a) { return a *= s; }

  /// Facewise product.
  friend StaggeredField hadamard(const StaggeredField& a, const StaggeredField& b) {
    a.require_shape(b);
    return StaggeredField(a.x_ * b.x_, a.y_ * b.y_);
  }

  Scalar squared_norm() const { return x_.square().sum() + y_.square().sum(); }

  friend Scalar dot(const StaggeredField& a, const StaggeredField& b) {
    a.require_shape(b);
    return (a.x_ * b.x_).sum() + (a.y_ * b.y_).sum();
  }

 private:
  Array x_;
  Array y_;
};

template <typename Scalar>
Scalar dot(const ScalarGrid<Scalar>& a, const ScalarGrid<Scalar>& b) {
  a.require_shape(b);
  return (a.array() * b.array()).sum();
}

template <typename Scalar>
Scalar squared_norm(const ScalarGrid<Scalar>& a) {
  return a.array().square().sum();
}

/// Channels of a vector-valued image; every channel has the same shape.
template <typename Scalar = double>
class MultiChannelImage {
 public:
  MultiChannelImage() = default;

  explicit MultiChannelImage(std::vector<ScalarGrid<Scalar>> channels) : channels_(std::move(channels)) {
    if (channels_.empty()) throw std::invalid_argument("image needs at least one channel");
    for (const auto& c : channels_) channels_.front().require_shape(c);
  }

  explicit MultiChannelImage(ScalarGrid<Scalar> grey) : channels_{std::move(grey)} {}

  MultiChannelImage(Index width, Index height, Index channels, Scalar value = Scalar(0)) {
    if (channels < 1) throw std::invalid_argument("image needs at least one channel");
    channels_.assign(static_cast<std::size_t>(channels), ScalarGrid<Scalar>(width, height, value));
  }

  Index channels() const { return static_cast<Index>(channels_.size()); }
  Index width() const { return channels_.front().width(); }
  Index height() const { return channels_.front().height(); }

  const ScalarGrid<Scalar>& operator[](Index c) const { return channels_[static_cast<std::size_t>(c)]; }
  /// Element access; assigning a grid of another shape is rejected by the solvers' shape checks.
  ScalarGrid<Scalar>& operator[](Index c) { return channels_[static_cast<std::size_t>(c)]; }

  const std::vector<ScalarGrid<Scalar>>& grids() const { return channels_; }

  bool same_shape(const MultiChannelImage& o) const {
    return channels() == o.channels() && channels_.front().same_shape(o.channels_.front());
  }

 private:
  std::vector<ScalarGrid<Scalar>> channels_;
};

template <typename Scalar>
using FieldSet = std::vector<StaggeredField<Scalar>>;

namespace detail {

// One-dimensional differences along columns (x) or rows (y) of a raw array.
// diff_*: forward difference, n -> n-1 entries.
// neg_adjoint_*: the negative adjoint of diff_*, n-1 -> n entries; equals the
// backward difference with zero values outside the array.

template <typename Scalar>
GridArray<Scalar> diff_x(const GridArray<Scalar>& a) {
  const Index n = a.cols();
  if (n < 2) return GridArray<Scalar>(a.rows(), 0);
  return a.rightCols(n - 1) - a.leftCols(n - 1);
}

template <typename Scalar>
GridArray<Scalar> diff_y(const GridArray<Scalar>& a) {
  const Index n = a.rows();
  if (n < 2) return GridArray<Scalar>(0, a.cols());
  return a.bottomRows(n - 1) - a.topRows(n - 1);
}

template <typename Scalar>
GridArray<Scalar> neg_adjoint_x(const GridArray<Scalar>& w) {
  GridArray<Scalar> out = GridArray<Scalar>::Zero(w.rows(), w.cols() + 1);
  const Index n = w.cols();
  if (n == 0) return out;
  out.leftCols(n) += w;
  out.rightCols(n) -= w;
  return out;
}

template <typename Scalar>
GridArray<Scalar> neg_adjoint_y(const GridArray<Scalar>& w) {
  GridArray<Scalar> out = GridArray<Scalar>::Zero(w.rows() + 1, w.cols());
  const Index n = w.rows();
  if (n == 0) return out;
  out.topRows(n) += w;
  out.bottomRows(n) -= w;
  return out;
}

// Sum of the left and right neighbours, zero outside.
template <typename Scalar>
GridArray<Scalar> neighbour_sum_x(const GridArray<Scalar>& a) {
  GridArray<Scalar> out = GridArray<Scalar>::Zero(a.rows(), a.cols());
  const Index n = a.cols();
  if (n < 2) return out;
  out.rightCols(n - 1) += a.leftCols(n - 1);
  out.leftCols(n - 1) += a.rightCols(n - 1);
  return out;
}

template <typename Scalar>
GridArray<Scalar> neighbour_sum_y(const GridArray<Scalar>& a) {
  GridArray<Scalar> out = GridArray<Scalar>::Zero(a.rows(), a.cols());
  const Index n = a.rows();
  if (n < 2) return out;
  out.bottomRows(n - 1) += a.topRows(n - 1);
  out.topRows(n - 1) += a.bottomRows(n - 1);
  return out;
}

// Number of in-range neighbours along x (Neumann stencil weight).
template <typename Scalar>
GridArray<Scalar> neighbour_count_x(Index rows, Index cols) {
  GridArray<Scalar> out = GridArray<Scalar>::Constant(rows, cols, cols > 1 ? Scalar(2) : Scalar(0));
  if (cols > 1) {
    out.col(0).setConstant(1);
    out.col(cols - 1).setConstant(1);
  }
  return out;
}

template <typename Scalar>
GridArray<Scalar> neighbour_count_y(Index rows, Index cols) {
  GridArray<Scalar> out = GridArray<Scalar>::Constant(rows, cols, rows > 1 ? Scalar(2) : Scalar(0));
  if (rows > 1) {
    out.row(0).setConstant(1);
    out.row(rows - 1).setConstant(1);
  }
  return out;
}

// One Jacobi sweep for (diag - weight * A) x = rhs, where A sums the four
// axis neighbours (zero outside the array):
//   out = (rhs + weight * neighbour_sum(x)) / diag
template <typename Scalar>
void jacobi_sweep(const GridArray<Scalar>& x, const GridArray<Scalar>& rhs, const GridArray<Scalar>& diag,
                  Scalar weight, GridArray<Scalar>& out) {
  const Index rows = x.rows(), cols = x.cols();
  out.resize(rows, cols);
  if (rows == 0 || cols == 0) return;
  const std::vector<Scalar> zeros(static_cast<std::size_t>(cols), Scalar(0));
  const Scalar* px = x.data();
  const Scalar* pr = rhs.data();
  const Scalar* pd = diag.data();
  Scalar* po = out.data();
  for (Index j = 0; j < rows; ++j) {
    const Index o = j * cols;
    const Scalar* row = px + o;
    const Scalar* up = j > 0 ? row - cols : zeros.data();
    const Scalar* down = j + 1 < rows ? row + cols : zeros.data();
    if (cols == 1) {
      po[o] = (pr[o] + weight * (Scalar(0) + (up[0] + down[0]))) / pd[o];
      continue;
    }
    po[o] = (pr[o] + weight * ((Scalar(0) + row[1]) + (up[0] + down[0]))) / pd[o];
    for (Index i = 1; i + 1 < cols; ++i) {
      po[o + i] = (pr[o + i] + weight * ((row[i - 1] + row[i + 1]) + (up[i] + down[i]))) / pd[o + i];
    }
    const Index l = cols - 1;
    po[o + l] = (pr[o + l] + weight * ((row[l - 1] + Scalar(0)) + (up[l] + down[l]))) / pd[o + l];
  }
}

}  // namespace detail

/// Forward differences onto the interior faces.
template <typename Scalar>
StaggeredField<Scalar> grad_forward(const ScalarGrid<Scalar>& u) {
  return StaggeredField<Scalar>(detail::diff_x(u.array()), detail::diff_y(u.array()));
}

/// Negative adjoint of grad_forward: <grad_forward(u), w> = -<u, divergence(w)>.
template <typename Scalar>
ScalarGrid<Scalar> divergence(const StaggeredField<Scalar>& w) {
  GridArray<Scalar> out = detail::neg_adjoint_x(w.x_array());
  out += detail::neg_adjoint_y(w.y_array());
  return ScalarGrid<Scalar>(std::move(out));
}

template <typename Scalar>
ScalarGrid<Scalar> divergence(const StaggeredField<Scalar>& w, Index width, Index height) {
  if (!w.matches(width, height)) throw std::invalid_argument("staggered field does not match grid");
  return divergence(w);
}

/// Five-point Laplacian with reflecting boundaries, divergence(grad_forward(u)).
template <typename Scalar>
ScalarGrid<Scalar> laplacian_u(const ScalarGrid<Scalar>& u) {
  return divergence(grad_forward(u));
}

/// Componentwise Laplacian of a staggered field: Dirichlet along the
/// component's own direction, Neumann across it. <w, laplacian_v(w)> = -S2(w).
template <typename Scalar>
StaggeredField<Scalar> laplacian_v(const StaggeredField<Scalar>& w) {
  using detail::diff_x;
  using detail::diff_y;
  using detail::neg_adjoint_x;
  using detail::neg_adjoint_y;
  GridArray<Scalar> lx = diff_x<Scalar>(neg_adjoint_x(w.x_array()));
  lx += neg_adjoint_y<Scalar>(diff_y(w.x_array()));
  GridArray<Scalar> ly = neg_adjoint_x<Scalar>(diff_x(w.y_array()));
  ly += diff_y<Scalar>(neg_adjoint_y(w.y_array()));
  return StaggeredField<Scalar>(std::move(lx), std::move(ly));
}

/// Diagonal of -laplacian_u (the neighbour count of each cell).
template <typename Scalar>
GridArray<Scalar> laplacian_u_degree(Index width, Index height) {
  return detail::neighbour_count_x<Scalar>(height, width) + detail::neighbour_count_y<Scalar>(height, width);
}

/// Neighbour sum of cell data, zero outside the grid.
template <typename Scalar>
GridArray<Scalar> laplacian_u_offdiag(const ScalarGrid<Scalar>& u) {
  GridArray<Scalar> s = detail::neighbour_sum_x(u.array());
  s += detail::neighbour_sum_y(u.array());
  return s;
}

/// Diagonal of -laplacian_v, per component.
template <typename Scalar>
StaggeredField<Scalar> laplacian_v_degree(Index width, Index height) {
  const Index rows_x = height, cols_x = width - 1;
  const Index rows_y = height - 1, cols_y = width;
  GridArray<Scalar> dx = GridArray<Scalar>::Constant(rows_x, cols_x, 2) + detail::neighbour_count_y<Scalar>(rows_x, cols_x);
  GridArray<Scalar> dy = detail::neighbour_count_x<Scalar>(rows_y, cols_y) + GridArray<Scalar>::Constant(rows_y, cols_y, 2);
  return StaggeredField<Scalar>(std::move(dx), std::move(dy));
}

/// Off-diagonal part of laplacian_v applied to w (neighbour sums, zero outside).
template <typename Scalar>
StaggeredField<Scalar> laplacian_v_offdiag(const StaggeredField<Scalar>& w) {
  GridArray<Scalar> sx = detail::neighbour_sum_x(w.x_array());
  sx += detail::neighbour_sum_y(w.x_array());
  GridArray<Scalar> sy = detail::neighbour_sum_x(w.y_array());
  sy += detail::neighbour_sum_y(w.y_array());
  return StaggeredField<Scalar>(std::move(sx), std::move(sy));
}

/// Mirror along x. Face x-components change sign under the flip.
template <typename Scalar>
ScalarGrid<Scalar> flip_x(const ScalarGrid<Scalar>& u) {
  return ScalarGrid<Scalar>(GridArray<Scalar>(u.array().rowwise().reverse()));
}

template <typename Scalar>
StaggeredField<Scalar> flip_x(const StaggeredField<Scalar>& w) {
  return StaggeredField<Scalar>(GridArray<Scalar>(-w.x_array().rowwise().reverse()),
                                GridArray<Scalar>(w.y_array().rowwise().reverse()));
}

template <typename Scalar>
bool all_finite(const ScalarGrid<Scalar>& u) {
  return u.array().isFinite().all();
}

template <typename Scalar>
bool all_finite(const StaggeredField<Scalar>& w) {
  return w.x_array().isFinite().all() && w.y_array().isFinite().all();
}

/// Cell-centred boolean map with the same N x M layout as a ScalarGrid.
using BinaryMap = GridArray<bool>;

using Grid = ScalarGrid<double>;
using Field = StaggeredField<double>;
using Image = MultiChannelImage<double>;

}  // namespace couplevar
