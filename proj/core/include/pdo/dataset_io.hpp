// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pdo/field.hpp"

namespace pdo {

inline constexpr int kDatasetFormatVersion = 1;

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;

  /// Consecutive blocks: [0, n_train), [n_train, n_train + n_val), rest.
  static SplitIndices sequential(int n_train, int n_val, int n_test);
};

/// Metadata stored next to the raw instance files.
struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  std::string system;
  Grid grid;
  std::vector<std::string> channels;
  int count = 0;
  NormStats stats;
  SplitIndices splits;
  std::uint64_t master_seed = 0;
  /// Optional per-instance generator parameters (e.g. {"x0": 0.1, "hu0": -1.3}).
  std::vector<std::map<std::string, double>> instance_params;

  /// Splits disjoint and covering [0, count), stats consistent with channels.
  void validate() const;
};

/// Computes normalization statistics over the training split only.
NormStats training_stats(std::span<const Field> instances, const SplitIndices& splits);

/// File name of instance `index`: inst_{index:05}.f32.
std::string instance_file_name(int index);

/// Writes manifest.json and one headerless little-endian float32 file per instance.
/// Every file is written under a .tmp name and renamed once complete.
void write_dataset(std::span<const Field> instances, const DatasetManifest& manifest,
                   const std::filesystem::path& directory);

DatasetManifest read_manifest(const std::filesystem::path& directory);

struct Dataset {
  std::vector<Field> instances;
  DatasetManifest manifest;

  std::vector<Field> subset(std::span<const int> indices) const;
};

/// Reads every instance with the manifest-declared shape. No normalization is applied.
Dataset read_dataset(const std::filesystem::path& directory);

/// Raw float32 file helpers shared with the checkpoint format.
void write_f32_file(const std::filesystem::path& path, std::span<const float> values);
std::vector<float> read_f32_file(const std::filesystem::path& path, std::size_t expected_count);

/// Writes text to `path` via a .tmp sibling and an atomic rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace pdo
