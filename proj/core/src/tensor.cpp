// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include "pdo/tensor.hpp"

#include <algorithm>

namespace pdo {

Tensor stack_fields(std::span<const Field* const> fields) {
  if (fields.empty()) throw ConfigError("cannot stack an empty set of fields");
  const Field& first = *fields.front();
  Tensor out(static_cast<int>(fields.size()), first.n_channels(), first.grid().n_time(),
             first.grid().n_space());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const Field& f = *fields[i];
    if (f.channels() != first.channels() || !(f.grid() == first.grid())) {
      throw ConfigError("stacked fields must share grid and channels");
    }
    std::copy(f.data().begin(), f.data().end(), out.sample(static_cast<int>(i)).begin());
  }
  return out;
}

Tensor stack_fields(std::span<const Field> fields) {
  std::vector<const Field*> ptrs;
  ptrs.reserve(fields.size());
  for (const Field& f : fields) ptrs.push_back(&f);
  return stack_fields(std::span<const Field* const>(ptrs));
}

Tensor repeat_field(const Field& field, int count) {
  Tensor out(count, field.n_channels(), field.grid().n_time(), field.grid().n_space());
  for (int i = 0; i < count; ++i) {
    std::copy(field.data().begin(), field.data().end(), out.sample(i).begin());
  }
  return out;
}

Field unstack_field(const Tensor& batch, int i, const Grid& grid,
                    const std::vector<std::string>& channels) {
  if (batch.h() != grid.n_time() || batch.w() != grid.n_space() ||
      batch.c() != static_cast<int>(channels.size())) {
    throw ConfigError("batch shape does not match the requested field");
  }
  auto s = batch.sample(i);
  return Field(grid, channels, std::vector<float>(s.begin(), s.end()));
}

}  // namespace pdo
