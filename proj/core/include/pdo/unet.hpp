// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pdo/tensor.hpp"

namespace pdo {

struct NetConfig {
  /// Field channels C; the output has C channels.
  int channels = 2;
  /// Number of C-channel input blocks (3 = state, conditioning, mask; 1 = unconditional).
  int input_blocks = 3;
  int base_width = 32;
  /// Number of factor-2 down/up levels.
  int depth = 3;
  int embedding_dim = 128;

  int channels_in() const { return channels * input_blocks; }
  /// Width of encoder level l: base, then 2x base from level 1 on.
  int level_width(int level) const { return level == 0 ? base_width : 2 * base_width; }
  void validate() const;
  /// Throws ConfigError when h or w is not divisible by 2^depth.
  void check_spatial(int h, int w) const;
  bool operator==(const NetConfig&) const = default;
};

template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;
};

template <typename T>
struct UNetCache {
  struct BlockCache {
    BasicTensor<T> x;
    BasicTensor<T> h1;
  };
  BasicTensor<T> input;
  std::vector<T> emb0, emb_z1, emb_e, emb_act;
  std::vector<BlockCache> blocks;
  BasicTensor<T> final_h;
};

/// Residual U-Net with a sinusoidal noise-level embedding fed to every block.
/// Evaluation through `forward` is const and safe to call concurrently.
template <typename T>
class UNet {
 public:
  UNet() = default;
  /// Kaiming-uniform weights, zero biases, zero output convolution.
  UNet(NetConfig config, std::uint64_t seed);

  const NetConfig& config() const noexcept { return config_; }
  std::vector<Param<T>>& params() noexcept { return params_; }
  const std::vector<Param<T>>& params() const noexcept { return params_; }
  std::size_t parameter_count() const;

  BasicTensor<T> forward(const BasicTensor<T>& input, std::span<const T> noise_cond) const;
  BasicTensor<T> forward(const BasicTensor<T>& input, std::span<const T> noise_cond,
                         UNetCache<T>& cache) const;
  /// Accumulates parameter gradients of <grad_out, output> into Param::grad.
  void backward(const UNetCache<T>& cache, const BasicTensor<T>& grad_out);
  void zero_grad();

  /// Copy with parameters converted to another scalar type.
  template <typename U>
  UNet<U> cast() const {
    UNet<U> out;
    out.init_layout(config_);
    for (std::size_t p = 0; p < params_.size(); ++p) {
      auto& dst = out.params()[p];
      dst.value.assign(params_[p].value.begin(), params_[p].value.end());
    }
    return out;
  }

  /// Builds the parameter list for a config without initializing values.
  void init_layout(const NetConfig& config);

 private:
  struct Conv {
    int w, b, cin, cout, k;
  };
  struct Linear {
    int w, b, in, out;
  };
  struct Block {
    Conv conv1, conv2;
    Linear emb;
    bool has_skip;
    Conv skip;
  };

  int add_param(std::string name, std::vector<int> shape);
  Conv make_conv(const std::string& name, int cin, int cout, int k);
  Linear make_linear(const std::string& name, int in, int out);
  Block make_block(const std::string& name, int cin, int cout);

  NetConfig config_;
  std::vector<Param<T>> params_;
  Linear emb1_{}, emb2_{};
  Conv in_conv_{}, out_conv_{};
  std::vector<Block> enc_;
  Block mid_{};
  std::vector<Block> dec_;

  BasicTensor<T> conv(const Conv& c, const BasicTensor<T>& x) const;
  BasicTensor<T> conv_backward(const Conv& c, const BasicTensor<T>& x, const BasicTensor<T>& g,
                               bool need_input_grad);
  BasicTensor<T> block(const Block& b, const BasicTensor<T>& x, std::span<const T> emb_act,
                       typename UNetCache<T>::BlockCache* cache) const;
  BasicTensor<T> block_backward(const Block& b, const typename UNetCache<T>::BlockCache& cache,
                                std::span<const T> emb_act, std::span<T> emb_act_grad,
                                const BasicTensor<T>& g);
  std::vector<T> embed(std::span<const T> noise_cond, UNetCache<T>* cache) const;
};

extern template class UNet<float>;
extern template class UNet<double>;

}  // namespace pdo
