#include "team/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "team/errors.hpp"

namespace team {

Image::Image(Vector pixels, int height, int width, int channels)
    : pixels_(std::move(pixels)), height_(height), width_(width), channels_(channels) {
  if (height <= 0 || width <= 0 || channels <= 0) {
    throw ShapeError("image dimensions must be positive");
  }
  if (pixels_.size() != static_cast<std::ptrdiff_t>(height) * width * channels) {
    throw ShapeError("pixel count " + std::to_string(pixels_.size()) + " does not match " +
                     std::to_string(height) + "x" + std::to_string(width) + "x" +
                     std::to_string(channels));
  }
  for (std::ptrdiff_t i = 0; i < pixels_.size(); ++i) {
    const double v = pixels_[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError("pixel " + std::to_string(i) + " outside [0,1]");
    }
  }
}

Image Image::clamped(const Vector& values, int height, int width, int channels) {
  return Image(clamp_unit(values), height, width, channels);
}

Image Image::zeros(int height, int width, int channels) {
  return Image(Vector::Zero(static_cast<std::ptrdiff_t>(height) * width * channels), height,
               width, channels);
}

Vector clamp_unit(const Vector& values) {
  Vector out(values.size());
  for (std::ptrdiff_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw NumericError("non-finite pixel value");
    out[i] = std::clamp(values[i], 0.0, 1.0);
  }
  return out;
}

Dataset::Dataset(std::vector<Image> images, std::vector<int> labels, int class_count)
    : images_(std::move(images)), labels_(std::move(labels)), class_count_(class_count) {
  if (images_.size() != labels_.size()) {
    throw ConsistencyError("dataset has " + std::to_string(images_.size()) + " images but " +
                           std::to_string(labels_.size()) + " labels");
  }
  if (class_count_ <= 0) throw ConfigError("class_count must be positive");
  for (int y : labels_) {
    if (y < 0 || y >= class_count_) {
      throw DomainError("label " + std::to_string(y) + " outside [0, class_count)");
    }
  }
  for (const Image& img : images_) {
    if (!img.same_shape(images_.front())) throw ShapeError("dataset images differ in shape");
  }
}

Dataset Dataset::slice(std::size_t first, std::size_t count) const {
  first = std::min(first, images_.size());
  const std::size_t last = std::min(images_.size(), first + count);
  return Dataset({images_.begin() + first, images_.begin() + last},
                 {labels_.begin() + first, labels_.begin() + last}, class_count_);
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Image> imgs;
  std::vector<int> labels;
  imgs.reserve(indices.size());
  labels.reserve(indices.size());
  for (std::size_t i : indices) {
    imgs.push_back(images_.at(i));
    labels.push_back(labels_.at(i));
  }
  return Dataset(std::move(imgs), std::move(labels), class_count_);
}

}  // namespace team
