// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include "pdo/field.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "pdo/error.hpp"

namespace pdo {

Grid::Grid(int n_space, int n_time, double x_min, double x_max, double t_min, double t_max)
    : n_space_(n_space),
      n_time_(n_time),
      x_min_(x_min),
      x_max_(x_max),
      t_min_(t_min),
      t_max_(t_max) {
  if (n_space < 1 || n_time < 2) {
    throw ConfigError("grid needs n_space >= 1 and n_time >= 2");
  }
  dx_ = (x_max - x_min) / n_space;
  dt_ = (t_max - t_min) / (n_time - 1);
  if (!(dx_ > 0.0) || !(dt_ > 0.0)) {
    throw ConfigError("grid steps must be strictly positive");
  }
}

Grid unit_square_grid(int n) {
  if (n < 3) throw ConfigError("unit square grid needs at least 3 nodes per axis");
  const double h = 1.0 / (n - 1);
  return Grid(n, n, -0.5 * h, 1.0 + 0.5 * h, 0.0, 1.0);
}

Field::Field(Grid grid, std::vector<std::string> channels)
    : Field(grid, channels, std::vector<float>(channels.size() * grid.points(), 0.0f)) {}

Field::Field(Grid grid, std::vector<std::string> channels, std::vector<float> data)
    : grid_(grid), channels_(std::move(channels)), data_(std::move(data)) {
  if (channels_.empty()) throw ConfigError("field needs at least one channel");
  std::set<std::string> unique(channels_.begin(), channels_.end());
  if (unique.size() != channels_.size()) throw ConfigError("field channel names must be unique");
  if (data_.size() != channels_.size() * grid_.points()) {
    throw ConfigError("field data size does not match channels x grid");
  }
}

int Field::channel_index(const std::string& name) const {
  auto it = std::find(channels_.begin(), channels_.end(), name);
  if (it == channels_.end()) throw ConfigError("field has no channel '" + name + "'");
  return static_cast<int>(it - channels_.begin());
}

std::span<float> Field::channel(int c) noexcept {
  return std::span<float>(data_).subspan(c * channel_stride(), channel_stride());
}

std::span<const float> Field::channel(int c) const noexcept {
  return std::span<const float>(data_).subspan(c * channel_stride(), channel_stride());
}

bool Field::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Field Field::select(std::span<const int> channel_indices) const {
  std::vector<std::string> names;
  std::vector<float> out;
  out.reserve(channel_indices.size() * channel_stride());
  for (int c : channel_indices) {
    names.push_back(channels_.at(c));
    auto src = channel(c);
    out.insert(out.end(), src.begin(), src.end());
  }
  return Field(grid_, std::move(names), std::move(out));
}

void NormStats::validate() const {
  if (mean.size() != channels.size() || std.size() != channels.size()) {
    throw ConfigError("norm stats arrays disagree in length");
  }
  for (double s : std) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("norm stats std must be positive");
  }
}

NormStats compute_norm_stats(std::span<const Field> fields) {
  if (fields.empty()) throw ConfigError("cannot compute statistics of an empty set");
  const Field& first = fields.front();
  NormStats stats;
  stats.channels = first.channels();
  const int nc = first.n_channels();
  stats.mean.assign(nc, 0.0);
  stats.std.assign(nc, 0.0);
  for (int c = 0; c < nc; ++c) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const Field& f : fields) {
      if (f.channels() != first.channels()) throw ConfigError("fields disagree on channels");
      for (float v : f.channel(c)) sum += v;
      count += f.channel_stride();
    }
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (const Field& f : fields) {
      for (float v : f.channel(c)) sq += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(sq / static_cast<double>(count));
    stats.mean[c] = mean;
    stats.std[c] = sd > 1e-12 ? sd : 1.0;
  }
  return stats;
}

namespace {

void check_match(const Field& field, const NormStats& stats) {
  stats.validate();
  if (field.channels() != stats.channels) {
    throw ConfigError("normalization statistics do not match the field's channels");
  }
}

}  // namespace

Field normalize(const Field& field, const NormStats& stats) {
  check_match(field, stats);
  Field out = field;
  for (int c = 0; c < field.n_channels(); ++c) {
    const double m = stats.mean[c];
    const double inv = 1.0 / stats.std[c];
    for (float& v : out.channel(c)) v = static_cast<float>((v - m) * inv);
  }
  return out;
}

Field denormalize(const Field& field, const NormStats& stats) {
  check_match(field, stats);
  Field out = field;
  for (int c = 0; c < field.n_channels(); ++c) {
    const double m = stats.mean[c];
    const double s = stats.std[c];
    for (float& v : out.channel(c)) v = static_cast<float>(v * s + m);
  }
  return out;
}

}  // namespace pdo
