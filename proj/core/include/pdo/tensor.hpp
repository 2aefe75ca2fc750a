// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "pdo/error.hpp"
#include "pdo/field.hpp"

namespace pdo {

/// Dense batch of fields, layout [n][c][h][w] where h is time (or y) and w is space.
template <typename T>
class BasicTensor {
 public:
  BasicTensor() = default;
  BasicTensor(int n, int c, int h, int w, T fill = T(0))
      : shape_{n, c, h, w}, data_(static_cast<std::size_t>(n) * c * h * w, fill) {}

  int n() const noexcept { return shape_[0]; }
  int c() const noexcept { return shape_[1]; }
  int h() const noexcept { return shape_[2]; }
  int w() const noexcept { return shape_[3]; }
  const std::array<int, 4>& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t sample_size() const noexcept {
    return static_cast<std::size_t>(shape_[1]) * shape_[2] * shape_[3];
  }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(shape_[2]) * shape_[3]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }

  std::span<T> sample(int i) noexcept {
    return std::span<T>(data_).subspan(i * sample_size(), sample_size());
  }
  std::span<const T> sample(int i) const noexcept {
    return std::span<const T>(data_).subspan(i * sample_size(), sample_size());
  }

  T& at(int i, int c, int y, int x) noexcept { return data_[offset(i, c, y, x)]; }
  T at(int i, int c, int y, int x) const noexcept { return data_[offset(i, c, y, x)]; }

  bool same_shape(const BasicTensor& o) const noexcept { return shape_ == o.shape_; }

 private:
  std::size_t offset(int i, int c, int y, int x) const noexcept {
    return ((static_cast<std::size_t>(i) * shape_[1] + c) * shape_[2] + y) * shape_[3] + x;
  }

  std::array<int, 4> shape_{0, 0, 0, 0};
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;

/// Stacks fields sharing channels and grid into a batch.
Tensor stack_fields(std::span<const Field> fields);
Tensor stack_fields(std::span<const Field* const> fields);

/// Batch of `count` copies of one field.
Tensor repeat_field(const Field& field, int count);

/// Extracts sample i of a batch as a field on the given grid.
Field unstack_field(const Tensor& batch, int i, const Grid& grid,
                    const std::vector<std::string>& channels);

}  // namespace pdo
