#pragma once

#include <Eigen/Core>
#include <vector>

namespace photoloss {

/// H x W scalar field, indexed (row, col) = (v, u). Pixel centers sit at
/// integer coordinates, origin at the top-left corner, u = column, v = row.
using Grid = Eigen::ArrayXXd;
using BoolGrid = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using IndexGrid = Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic>;

/// Intensity image with 1 or 3 channels, values in [0, 1].
class Image {
 public:
  Image() = default;
  explicit Image(std::vector<Grid> planes);
  static Image constant(int height, int width, int channels, double value);

  int height() const { return planes_.empty() ? 0 : int(planes_[0].rows()); }
  int width() const { return planes_.empty() ? 0 : int(planes_[0].cols()); }
  int channels() const { return int(planes_.size()); }

  const Grid& plane(int c) const { return planes_[size_t(c)]; }
  Grid& plane(int c) { return planes_[size_t(c)]; }
  double at(int v, int u, int c) const { return planes_[size_t(c)](v, u); }

  bool same_shape(const Image& other) const;

 private:
  std::vector<Grid> planes_;
};

/// Per-pixel positive depth in scene units.
struct DepthMap {
  Grid values;

  DepthMap() = default;
  explicit DepthMap(Grid v);

  int height() const { return int(values.rows()); }
  int width() const { return int(values.cols()); }
};

/// Per-pixel positive inverse depth (1 / scene units).
struct InverseDepthMap {
  Grid values;

  InverseDepthMap() = default;
  explicit InverseDepthMap(Grid v);

  int height() const { return int(values.rows()); }
  int width() const { return int(values.cols()); }
};

InverseDepthMap invert(const DepthMap& depth);
DepthMap invert(const InverseDepthMap& inv_depth);

/// Throws std::invalid_argument if the grid contains NaN/Inf or values <= 0.
void check_positive_finite(const Grid& g, const char* what);

}  // namespace photoloss
