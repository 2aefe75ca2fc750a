// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include "pdo/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "json_io.hpp"

namespace pdo {

namespace fs = std::filesystem;
using detail::json;

SplitIndices SplitIndices::sequential(int n_train, int n_val, int n_test) {
  SplitIndices s;
  int k = 0;
  for (int i = 0; i < n_train; ++i) s.train.push_back(k++);
  for (int i = 0; i < n_val; ++i) s.val.push_back(k++);
  for (int i = 0; i < n_test; ++i) s.test.push_back(k++);
  return s;
}

void DatasetManifest::validate() const {
  if (format_version != kDatasetFormatVersion) {
    throw ValidationError("unsupported dataset format version " + std::to_string(format_version));
  }
  if (count < 1) throw ValidationError("dataset must hold at least one instance");
  if (channels.empty()) throw ValidationError("dataset must declare its channels");
  std::vector<int> seen(count, 0);
  for (const auto* list : {&splits.train, &splits.val, &splits.test}) {
    for (int i : *list) {
      if (i < 0 || i >= count) throw ValidationError("split index " + std::to_string(i) + " out of range");
      if (seen[i]++) throw ValidationError("split lists overlap at index " + std::to_string(i));
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw ValidationError("split lists do not cover every instance");
  }
  if (splits.train.empty()) throw ValidationError("training split is empty");
  stats.validate();
  if (stats.channels != channels) throw ValidationError("norm stats channels differ from dataset channels");
  if (!instance_params.empty() && static_cast<int>(instance_params.size()) != count) {
    throw ValidationError("instance_params must list one entry per instance");
  }
}

NormStats training_stats(std::span<const Field> instances, const SplitIndices& splits) {
  std::vector<Field> train;
  train.reserve(splits.train.size());
  for (int i : splits.train) train.push_back(instances[i]);
  return compute_norm_stats(train);
}

std::string instance_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "inst_%05d.f32", index);
  return buf;
}

namespace {

void write_bytes_atomic(const fs::path& path, const char* bytes, std::size_t n) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes, static_cast<std::streamsize>(n));
    out.flush();
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace

void write_f32_file(const fs::path& path, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    write_bytes_atomic(path, reinterpret_cast<const char*>(values.data()), values.size_bytes());
  } else {
    std::vector<std::uint32_t> swapped(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint32_t u;
      std::memcpy(&u, &values[i], 4);
      swapped[i] = __builtin_bswap32(u);
    }
    write_bytes_atomic(path, reinterpret_cast<const char*>(swapped.data()), values.size_bytes());
  }
}

std::vector<float> read_f32_file(const fs::path& path, std::size_t expected_count) {
  std::error_code ec;
  const auto bytes = fs::file_size(path, ec);
  if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
  const std::size_t expected_bytes = expected_count * sizeof(float);
  if (bytes != expected_bytes) {
    throw CorruptionError(path.filename().string() + ": expected " + std::to_string(expected_bytes) +
                          " bytes, found " + std::to_string(bytes));
  }
  std::vector<float> values(expected_count);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(expected_bytes));
  if (!in) throw CorruptionError(path.filename().string() + ": short read");
  if constexpr (std::endian::native != std::endian::little) {
    for (float& v : values) {
      std::uint32_t u;
      std::memcpy(&u, &v, 4);
      u = __builtin_bswap32(u);
      std::memcpy(&v, &u, 4);
    }
  }
  return values;
}

void write_text_file(const fs::path& path, const std::string& text) {
  write_bytes_atomic(path, text.data(), text.size());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

json manifest_to_json(const DatasetManifest& m) {
  json j{{"format_version", m.format_version},
         {"system", m.system},
         {"grid", detail::grid_to_json(m.grid)},
         {"channels", m.channels},
         {"count", m.count},
         {"norm_stats", detail::stats_to_json(m.stats)},
         {"splits", {{"train", m.splits.train}, {"val", m.splits.val}, {"test", m.splits.test}}},
         {"master_seed", m.master_seed},
         {"layout", "channel-major [channels, n_time, n_space], little-endian float32"},
         {"file_pattern", "inst_{index:05}.f32"}};
  if (!m.instance_params.empty()) j["instance_params"] = m.instance_params;
  return j;
}

DatasetManifest manifest_from_json(const json& j) {
  const std::string ctx = "manifest.json";
  DatasetManifest m;
  m.format_version = detail::require_as<int>(j, "format_version", ctx);
  if (m.format_version != kDatasetFormatVersion) {
    throw ValidationError("manifest.json: unsupported format version " + std::to_string(m.format_version));
  }
  m.system = detail::require_as<std::string>(j, "system", ctx);
  m.grid = detail::grid_from_json(detail::require(j, "grid", ctx), ctx);
  m.channels = detail::require_as<std::vector<std::string>>(j, "channels", ctx);
  m.count = detail::require_as<int>(j, "count", ctx);
  m.stats = detail::stats_from_json(detail::require(j, "norm_stats", ctx), ctx);
  const json& s = detail::require(j, "splits", ctx);
  m.splits.train = detail::require_as<std::vector<int>>(s, "train", ctx + ".splits");
  m.splits.val = detail::require_as<std::vector<int>>(s, "val", ctx + ".splits");
  m.splits.test = detail::require_as<std::vector<int>>(s, "test", ctx + ".splits");
  m.master_seed = detail::require_as<std::uint64_t>(j, "master_seed", ctx);
  if (j.contains("instance_params")) {
    m.instance_params = j.at("instance_params").get<std::vector<std::map<std::string, double>>>();
  }
  m.validate();
  return m;
}

}  // namespace

void write_dataset(std::span<const Field> instances, const DatasetManifest& manifest,
                   const fs::path& directory) {
  manifest.validate();
  if (static_cast<int>(instances.size()) != manifest.count) {
    throw ValidationError("manifest count does not match the number of instances");
  }
  for (const Field& f : instances) {
    if (!(f.grid() == manifest.grid) || f.channels() != manifest.channels) {
      throw ValidationError("all instances must share the manifest grid and channels");
    }
  }
  fs::create_directories(directory);
  for (int i = 0; i < manifest.count; ++i) {
    write_f32_file(directory / instance_file_name(i), instances[i].data());
  }
  // The manifest goes last: a directory without one is not a dataset.
  write_text_file(directory / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
}

DatasetManifest read_manifest(const fs::path& directory) {
  const fs::path path = directory / "manifest.json";
  if (!fs::exists(path)) throw IoError("missing manifest: " + path.string());
  return manifest_from_json(detail::parse_json_text(read_text_file(path), "manifest.json"));
}

Dataset read_dataset(const fs::path& directory) {
  Dataset ds;
  ds.manifest = read_manifest(directory);
  const std::size_t per = ds.manifest.channels.size() * ds.manifest.grid.points();
  ds.instances.reserve(ds.manifest.count);
  for (int i = 0; i < ds.manifest.count; ++i) {
    ds.instances.emplace_back(ds.manifest.grid, ds.manifest.channels,
                              read_f32_file(directory / instance_file_name(i), per));
  }
  return ds;
}

std::vector<Field> Dataset::subset(std::span<const int> indices) const {
  std::vector<Field> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(instances.at(i));
  return out;
}

}  // namespace pdo
