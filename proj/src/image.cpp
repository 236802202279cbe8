#include "photoloss/image.hpp"

#include <stdexcept>

namespace photoloss {

Image::Image(std::vector<Grid> planes) : planes_(std::move(planes)) {
  if (planes_.size() != 1 && planes_.size() != 3)
    throw std::invalid_argument("Image: channel count must be 1 or 3");
  const auto rows = planes_[0].rows();
  const auto cols = planes_[0].cols();
  if (rows <= 0 || cols <= 0) throw std::invalid_argument("Image: empty plane");
  for (const Grid& p : planes_) {
    if (p.rows() != rows || p.cols() != cols)
      throw std::invalid_argument("Image: plane dimensions differ");
    if (!p.isFinite().all())
      throw std::invalid_argument("Image: non-finite intensity");
    if ((p < 0.0).any() || (p > 1.0).any())
      throw std::invalid_argument("Image: intensity outside [0, 1]");
  }
}

Image Image::constant(int height, int width, int channels, double value) {
  std::vector<Grid> planes(size_t(channels), Grid::Constant(height, width, value));
  return Image(std::move(planes));
}

bool Image::same_shape(const Image& other) const {
  return height() == other.height() && width() == other.width() &&
         channels() == other.channels();
}

void check_positive_finite(const Grid& g, const char* what) {
  if (g.size() == 0) throw std::invalid_argument(std::string(what) + ": empty");
  if (!g.isFinite().all())
    throw std::invalid_argument(std::string(what) + ": non-finite value");
  if ((g <= 0.0).any())
    throw std::invalid_argument(std::string(what) + ": non-positive value");
}

DepthMap::DepthMap(Grid v) : values(std::move(v)) {
  check_positive_finite(values, "DepthMap");
}

InverseDepthMap::InverseDepthMap(Grid v) : values(std::move(v)) {
  check_positive_finite(values, "InverseDepthMap");
}

InverseDepthMap invert(const DepthMap& depth) {
  return InverseDepthMap(depth.values.inverse());
}

DepthMap invert(const InverseDepthMap& inv_depth) {
  return DepthMap(inv_depth.values.inverse());
}

}  // namespace photoloss
