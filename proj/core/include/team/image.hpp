#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace team {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A flat pixel vector in [0,1] with its height/width/channel layout.
///
/// Pixels are stored row-major, channel-interleaved. Construction validates
/// both invariants (length and range); use `Image::clamped` to build one from
/// an arbitrary vector.
class Image {
 public:
  Image() = default;
  Image(Vector pixels, int height, int width, int channels = 1);

  /// Projects `values` onto [0,1] elementwise and wraps the result.
  static Image clamped(const Vector& values, int height, int width, int channels = 1);
  static Image zeros(int height, int width, int channels = 1);

  const Vector& pixels() const { return pixels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::ptrdiff_t size() const { return pixels_.size(); }
  double operator[](std::ptrdiff_t i) const { return pixels_[i]; }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.same_shape(b) && a.pixels_ == b.pixels_;
  }

 private:
  Vector pixels_;
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
};

/// Elementwise clamp to the unit box.
Vector clamp_unit(const Vector& values);

/// Labelled images. All images share one shape.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<Image> images, std::vector<int> labels, int class_count);

  std::size_t size() const { return images_.size(); }
  bool empty() const { return images_.empty(); }
  int class_count() const { return class_count_; }
  const Image& image(std::size_t i) const { return images_[i]; }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<Image>& images() const { return images_; }
  const std::vector<int>& labels() const { return labels_; }

  /// Contiguous sub-range [first, first + count), clipped to the dataset end.
  Dataset slice(std::size_t first, std::size_t count) const;
  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<Image> images_;
  std::vector<int> labels_;
  int class_count_ = 0;
};

}  // namespace team
