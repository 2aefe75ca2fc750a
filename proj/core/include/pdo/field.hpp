// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pdo {

/// Uniform space-time grid.
///
/// Space is cell-centred: cell i sits at x_min + (i + 1/2) dx with
/// dx = (x_max - x_min) / n_space. Time is sampled at snapshots
/// t_min + n dt with dt = (t_max - t_min) / (n_time - 1), so both ends are
/// included. Steady 2D problems reuse the time axis as the second spatial axis.
class Grid {
 public:
  Grid() = default;
  Grid(int n_space, int n_time, double x_min, double x_max, double t_min, double t_max);

  int n_space() const noexcept { return n_space_; }
  int n_time() const noexcept { return n_time_; }
  double x_min() const noexcept { return x_min_; }
  double x_max() const noexcept { return x_max_; }
  double t_min() const noexcept { return t_min_; }
  double t_max() const noexcept { return t_max_; }
  double dx() const noexcept { return dx_; }
  double dt() const noexcept { return dt_; }

  double x(int i) const noexcept { return x_min_ + (i + 0.5) * dx_; }
  double t(int n) const noexcept { return t_min_ + n * dt_; }

  std::size_t points() const noexcept {
    return static_cast<std::size_t>(n_space_) * static_cast<std::size_t>(n_time_);
  }

  bool operator==(const Grid&) const = default;

 private:
  int n_space_ = 0;
  int n_time_ = 0;
  double x_min_ = 0.0;
  double x_max_ = 0.0;
  double t_min_ = 0.0;
  double t_max_ = 0.0;
  double dx_ = 0.0;
  double dt_ = 0.0;
};

/// Unit square sampled on n x n nodes with spacing 1/(n-1) on both axes and
/// nodes on the boundary. The space extents are shifted half a cell outward so
/// the cell-centred convention of Grid lands exactly on the nodes.
Grid unit_square_grid(int n);

/// Discretized state: float32 data of shape [channels, n_time, n_space],
/// channel-major, then time, then space.
class Field {
 public:
  Field() = default;
  Field(Grid grid, std::vector<std::string> channels);
  Field(Grid grid, std::vector<std::string> channels, std::vector<float> data);

  const Grid& grid() const noexcept { return grid_; }
  const std::vector<std::string>& channels() const noexcept { return channels_; }
  int n_channels() const noexcept { return static_cast<int>(channels_.size()); }
  int channel_index(const std::string& name) const;

  std::size_t size() const noexcept { return data_.size(); }
  std::size_t channel_stride() const noexcept { return grid_.points(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  std::span<float> channel(int c) noexcept;
  std::span<const float> channel(int c) const noexcept;

  float& at(int c, int n, int i) noexcept { return data_[offset(c, n, i)]; }
  float at(int c, int n, int i) const noexcept { return data_[offset(c, n, i)]; }

  /// True when every entry is finite.
  bool all_finite() const noexcept;

  /// Copies the listed channels, in the given order, into a new field.
  Field select(std::span<const int> channel_indices) const;

 private:
  std::size_t offset(int c, int n, int i) const noexcept {
    return (static_cast<std::size_t>(c) * grid_.n_time() + n) * grid_.n_space() + i;
  }

  Grid grid_;
  std::vector<std::string> channels_;
  std::vector<float> data_;
};

/// Per-channel affine normalization statistics.
struct NormStats {
  std::vector<std::string> channels;
  std::vector<double> mean;
  std::vector<double> std;

  void validate() const;
};

/// Mean and population standard deviation per channel over all given fields.
/// Channels with zero spread get std = 1 so the transform stays invertible.
NormStats compute_norm_stats(std::span<const Field> fields);

Field normalize(const Field& field, const NormStats& stats);
Field denormalize(const Field& field, const NormStats& stats);

}  // namespace pdo
