// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include "pdo/unet.hpp"

#include <Eigen/Core>
#include <cmath>
#include <type_traits>

#include "pdo/error.hpp"
#include "pdo/rng.hpp"

namespace pdo {

void NetConfig::validate() const {
  if (channels < 1) throw ConfigError("network needs at least one field channel");
  if (input_blocks < 1 || input_blocks > 3) throw ConfigError("input_blocks must be 1, 2 or 3");
  if (base_width < 1) throw ConfigError("base_width must be positive");
  if (depth < 1 || depth > 6) throw ConfigError("depth must be in [1, 6]");
  if (embedding_dim < 2 || embedding_dim % 2 != 0) {
    throw ConfigError("embedding_dim must be a positive even number");
  }
}

void NetConfig::check_spatial(int h, int w) const {
  const int f = 1 << depth;
  if (h % f != 0 || w % f != 0) {
    throw ConfigError("spatial size " + std::to_string(h) + "x" + std::to_string(w) +
                      " is not divisible by 2^depth = " + std::to_string(f));
  }
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

// dst (+)= a * b. Eigen's packed GEMM is independent of operand addresses, but its
// matrix-vector and small coefficient-wise kernels peel by alignment, so those
// shapes go through a fixed-order loop to keep results bitwise reproducible.
template <typename D, typename A, typename B>
void product(D&& dst, const A& a, const B& b, bool accumulate) {
  const Eigen::Index rows = dst.rows(), cols = dst.cols(), depth = a.cols();
  if (rows > 1 && cols > 1 && rows + cols + depth >= 24) {
    if (accumulate) {
      dst.noalias() += a * b;
    } else {
      dst.noalias() = a * b;
    }
    return;
  }
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      typename std::decay_t<D>::Scalar s(0);
      for (Eigen::Index k = 0; k < depth; ++k) s += a(r, k) * b(k, c);
      dst(r, c) = accumulate ? dst(r, c) + s : s;
    }
}

template <typename T, typename V>
T ordered_sum(const V& v) {
  T s(0);
  for (Eigen::Index k = 0; k < v.size(); ++k) s += v(k);
  return s;
}

template <typename T>
T silu(T x) {
  return x / (T(1) + std::exp(-x));
}

template <typename T>
T silu_grad(T x) {
  const T s = T(1) / (T(1) + std::exp(-x));
  return s * (T(1) + x * (T(1) - s));
}

template <typename T>
BasicTensor<T> apply_silu(const BasicTensor<T>& x) {
  BasicTensor<T> y = x;
  for (T& v : y.data()) v = silu(v);
  return y;
}

// col[(ci*9 + ky*3 + kx)][y*W + x] = in[ci][y + ky - 1][x + kx - 1], zero padded.
template <typename T>
void im2col3(const T* in, int c, int h, int w, T* col) {
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int ci = 0; ci < c; ++ci) {
    const T* plane = in + ci * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* row = col + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          T* dst = row + static_cast<std::size_t>(y) * w;
          if (sy < 0 || sy >= h) {
            std::fill(dst, dst + w, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(sy) * w;
          for (int x = 0; x < w; ++x) {
            const int sx = x + kx - 1;
            dst[x] = (sx < 0 || sx >= w) ? T(0) : src[sx];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im3(const T* col, int c, int h, int w, T* out) {
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::fill(out, out + c * hw, T(0));
  for (int ci = 0; ci < c; ++ci) {
    T* plane = out + ci * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* row = col + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * hw;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const T* src = row + static_cast<std::size_t>(y) * w;
          T* dst = plane + static_cast<std::size_t>(sy) * w;
          for (int x = 0; x < w; ++x) {
            const int sx = x + kx - 1;
            if (sx >= 0 && sx < w) dst[sx] += src[x];
          }
        }
      }
    }
  }
}

template <typename T>
BasicTensor<T> avg_pool(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.n(), x.c(), x.h() / 2, x.w() / 2);
  for (int i = 0; i < x.n(); ++i)
    for (int c = 0; c < x.c(); ++c)
      for (int r = 0; r < y.h(); ++r)
        for (int q = 0; q < y.w(); ++q) {
          y.at(i, c, r, q) = T(0.25) * (x.at(i, c, 2 * r, 2 * q) + x.at(i, c, 2 * r, 2 * q + 1) +
                                        x.at(i, c, 2 * r + 1, 2 * q) + x.at(i, c, 2 * r + 1, 2 * q + 1));
        }
  return y;
}

template <typename T>
BasicTensor<T> avg_pool_backward(const BasicTensor<T>& g) {
  BasicTensor<T> gx(g.n(), g.c(), g.h() * 2, g.w() * 2);
  for (int i = 0; i < gx.n(); ++i)
    for (int c = 0; c < gx.c(); ++c)
      for (int r = 0; r < gx.h(); ++r)
        for (int q = 0; q < gx.w(); ++q) gx.at(i, c, r, q) = T(0.25) * g.at(i, c, r / 2, q / 2);
  return gx;
}

template <typename T>
BasicTensor<T> upsample(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.n(), x.c(), x.h() * 2, x.w() * 2);
  for (int i = 0; i < y.n(); ++i)
    for (int c = 0; c < y.c(); ++c)
      for (int r = 0; r < y.h(); ++r)
        for (int q = 0; q < y.w(); ++q) y.at(i, c, r, q) = x.at(i, c, r / 2, q / 2);
  return y;
}

template <typename T>
BasicTensor<T> upsample_backward(const BasicTensor<T>& g) {
  BasicTensor<T> gx(g.n(), g.c(), g.h() / 2, g.w() / 2);
  for (int i = 0; i < g.n(); ++i)
    for (int c = 0; c < g.c(); ++c)
      for (int r = 0; r < g.h(); ++r)
        for (int q = 0; q < g.w(); ++q) gx.at(i, c, r / 2, q / 2) += g.at(i, c, r, q);
  return gx;
}

template <typename T>
BasicTensor<T> concat(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  BasicTensor<T> y(a.n(), a.c() + b.c(), a.h(), a.w());
  for (int i = 0; i < a.n(); ++i) {
    auto dst = y.sample(i);
    auto sa = a.sample(i);
    auto sb = b.sample(i);
    std::copy(sa.begin(), sa.end(), dst.begin());
    std::copy(sb.begin(), sb.end(), dst.begin() + sa.size());
  }
  return y;
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> split(const BasicTensor<T>& g, int ca) {
  BasicTensor<T> a(g.n(), ca, g.h(), g.w());
  BasicTensor<T> b(g.n(), g.c() - ca, g.h(), g.w());
  for (int i = 0; i < g.n(); ++i) {
    auto src = g.sample(i);
    auto da = a.sample(i);
    auto db = b.sample(i);
    std::copy(src.begin(), src.begin() + da.size(), da.begin());
    std::copy(src.begin() + da.size(), src.end(), db.begin());
  }
  return {std::move(a), std::move(b)};
}

template <typename T>
void add_into(BasicTensor<T>& dst, const BasicTensor<T>& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t k = 0; k < d.size(); ++k) d[k] += s[k];
}

}  // namespace

template <typename T>
UNet<T>::UNet(NetConfig config, std::uint64_t seed) {
  init_layout(config);
  Rng rng(seed);
  for (auto& p : params_) {
    const bool bias = p.shape.size() == 1;
    if (bias) continue;
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < p.shape.size(); ++d) fan_in *= static_cast<std::size_t>(p.shape[d]);
    const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
    for (T& v : p.value) v = static_cast<T>(rng.uniform(-bound, bound));
  }
  std::fill(params_[out_conv_.w].value.begin(), params_[out_conv_.w].value.end(), T(0));
}

template <typename T>
int UNet<T>::add_param(std::string name, std::vector<int> shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  params_.push_back(Param<T>{std::move(name), std::move(shape), std::vector<T>(n, T(0)),
                             std::vector<T>(n, T(0))});
  return static_cast<int>(params_.size()) - 1;
}

template <typename T>
typename UNet<T>::Conv UNet<T>::make_conv(const std::string& name, int cin, int cout, int k) {
  Conv c{};
  c.w = add_param(name + ".weight", {cout, cin, k, k});
  c.b = add_param(name + ".bias", {cout});
  c.cin = cin;
  c.cout = cout;
  c.k = k;
  return c;
}

template <typename T>
typename UNet<T>::Linear UNet<T>::make_linear(const std::string& name, int in, int out) {
  Linear l{};
  l.w = add_param(name + ".weight", {out, in});
  l.b = add_param(name + ".bias", {out});
  l.in = in;
  l.out = out;
  return l;
}

template <typename T>
typename UNet<T>::Block UNet<T>::make_block(const std::string& name, int cin, int cout) {
  Block b{};
  b.conv1 = make_conv(name + ".conv1", cin, cout, 3);
  b.emb = make_linear(name + ".emb", config_.embedding_dim, cout);
  b.conv2 = make_conv(name + ".conv2", cout, cout, 3);
  b.has_skip = cin != cout;
  if (b.has_skip) b.skip = make_conv(name + ".skip", cin, cout, 1);
  return b;
}

template <typename T>
void UNet<T>::init_layout(const NetConfig& config) {
  config.validate();
  config_ = config;
  params_.clear();
  enc_.clear();
  dec_.clear();
  const int e = config.embedding_dim;
  emb1_ = make_linear("embed.fc1", e, e);
  emb2_ = make_linear("embed.fc2", e, e);
  in_conv_ = make_conv("in_conv", config.channels_in(), config.base_width, 3);
  int c = config.base_width;
  for (int l = 0; l < config.depth; ++l) {
    enc_.push_back(make_block("enc" + std::to_string(l), c, config.level_width(l)));
    c = config.level_width(l);
  }
  mid_ = make_block("mid", c, c);
  dec_.resize(config.depth);
  for (int l = config.depth - 1; l >= 0; --l) {
    dec_[l] = make_block("dec" + std::to_string(l), c + config.level_width(l), config.level_width(l));
    c = config.level_width(l);
  }
  out_conv_ = make_conv("out_conv", c, config.channels, 3);
}

template <typename T>
std::size_t UNet<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
void UNet<T>::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), T(0));
}

template <typename T>
BasicTensor<T> UNet<T>::conv(const Conv& c, const BasicTensor<T>& x) const {
  const int h = x.h(), w = x.w();
  const int hw = h * w;
  const int kk = c.cin * c.k * c.k;
  BasicTensor<T> y(x.n(), c.cout, h, w);
  CMapMat<T> wm(params_[c.w].value.data(), c.cout, kk);
  const auto& bias = params_[c.b].value;
  std::vector<T> col(c.k == 3 ? static_cast<std::size_t>(kk) * hw : 0);
  for (int i = 0; i < x.n(); ++i) {
    const T* src = x.sample(i).data();
    if (c.k == 3) im2col3(src, c.cin, h, w, col.data());
    CMapMat<T> cm(c.k == 3 ? col.data() : src, kk, hw);
    MapMat<T> out(y.sample(i).data(), c.cout, hw);
    product(out, wm, cm, false);
    for (int o = 0; o < c.cout; ++o) out.row(o).array() += bias[o];
  }
  return y;
}

template <typename T>
BasicTensor<T> UNet<T>::conv_backward(const Conv& c, const BasicTensor<T>& x, const BasicTensor<T>& g,
                                      bool need_input_grad) {
  const int h = x.h(), w = x.w();
  const int hw = h * w;
  const int kk = c.cin * c.k * c.k;
  CMapMat<T> wm(params_[c.w].value.data(), c.cout, kk);
  MapMat<T> gw(params_[c.w].grad.data(), c.cout, kk);
  auto& gb = params_[c.b].grad;
  BasicTensor<T> gx;
  if (need_input_grad) gx = BasicTensor<T>(x.n(), c.cin, h, w);
  std::vector<T> col(c.k == 3 ? static_cast<std::size_t>(kk) * hw : 0);
  std::vector<T> gcol(c.k == 3 && need_input_grad ? static_cast<std::size_t>(kk) * hw : 0);
  for (int i = 0; i < x.n(); ++i) {
    const T* src = x.sample(i).data();
    if (c.k == 3) im2col3(src, c.cin, h, w, col.data());
    CMapMat<T> cm(c.k == 3 ? col.data() : src, kk, hw);
    CMapMat<T> gm(g.sample(i).data(), c.cout, hw);
    product(gw, gm, cm.transpose(), true);
    for (int o = 0; o < c.cout; ++o) gb[o] += ordered_sum<T>(gm.row(o));
    if (need_input_grad) {
      if (c.k == 3) {
        MapMat<T> gc(gcol.data(), kk, hw);
        product(gc, wm.transpose(), gm, false);
        col2im3(gcol.data(), c.cin, h, w, gx.sample(i).data());
      } else {
        MapMat<T> gc(gx.sample(i).data(), kk, hw);
        product(gc, wm.transpose(), gm, false);
      }
    }
  }
  return gx;
}

template <typename T>
std::vector<T> UNet<T>::embed(std::span<const T> noise_cond, UNetCache<T>* cache) const {
  const int n = static_cast<int>(noise_cond.size());
  const int e = config_.embedding_dim;
  const int half = e / 2;
  std::vector<T> e0(static_cast<std::size_t>(n) * e);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < half; ++k) {
      const double freq = std::exp(-std::log(10000.0) * k / half);
      const double arg = static_cast<double>(noise_cond[i]) * freq;
      e0[i * e + k] = static_cast<T>(std::sin(arg));
      e0[i * e + half + k] = static_cast<T>(std::cos(arg));
    }
  }
  auto linear = [&](const Linear& l, const std::vector<T>& in) {
    std::vector<T> out(static_cast<std::size_t>(n) * l.out);
    CMapMat<T> wm(params_[l.w].value.data(), l.out, l.in);
    CMapMat<T> im(in.data(), n, l.in);
    MapMat<T> om(out.data(), n, l.out);
    product(om, im, wm.transpose(), false);
    for (int i = 0; i < n; ++i)
      for (int o = 0; o < l.out; ++o) om(i, o) += params_[l.b].value[o];
    return out;
  };
  std::vector<T> z1 = linear(emb1_, e0);
  std::vector<T> a1 = z1;
  for (T& v : a1) v = silu(v);
  std::vector<T> ev = linear(emb2_, a1);
  std::vector<T> act = ev;
  for (T& v : act) v = silu(v);
  if (cache) {
    cache->emb0 = std::move(e0);
    cache->emb_z1 = std::move(z1);
    cache->emb_e = std::move(ev);
    cache->emb_act = act;
  }
  return act;
}

template <typename T>
BasicTensor<T> UNet<T>::block(const Block& b, const BasicTensor<T>& x, std::span<const T> emb_act,
                              typename UNetCache<T>::BlockCache* cache) const {
  BasicTensor<T> h1 = conv(b.conv1, apply_silu(x));
  const int e = config_.embedding_dim;
  const auto& ew = params_[b.emb.w].value;
  const auto& eb = params_[b.emb.b].value;
  const std::size_t plane = h1.plane();
  for (int i = 0; i < x.n(); ++i) {
    auto hs = h1.sample(i);
    for (int o = 0; o < b.emb.out; ++o) {
      T shift = eb[o];
      for (int k = 0; k < e; ++k) shift += ew[o * e + k] * emb_act[i * e + k];
      for (std::size_t p = 0; p < plane; ++p) hs[o * plane + p] += shift;
    }
  }
  BasicTensor<T> out = conv(b.conv2, apply_silu(h1));
  if (b.has_skip) {
    add_into(out, conv(b.skip, x));
  } else {
    add_into(out, x);
  }
  if (cache) {
    cache->x = x;
    cache->h1 = std::move(h1);
  }
  return out;
}

template <typename T>
BasicTensor<T> UNet<T>::block_backward(const Block& b, const typename UNetCache<T>::BlockCache& cache,
                                       std::span<const T> emb_act, std::span<T> emb_act_grad,
                                       const BasicTensor<T>& g) {
  BasicTensor<T> g_h1 = conv_backward(b.conv2, apply_silu(cache.h1), g, true);
  auto gh = g_h1.data();
  auto h1 = cache.h1.data();
  for (std::size_t k = 0; k < gh.size(); ++k) gh[k] *= silu_grad(h1[k]);

  const int e = config_.embedding_dim;
  const auto& ew = params_[b.emb.w].value;
  auto& gew = params_[b.emb.w].grad;
  auto& geb = params_[b.emb.b].grad;
  const std::size_t plane = g_h1.plane();
  for (int i = 0; i < g_h1.n(); ++i) {
    auto gs = g_h1.sample(i);
    for (int o = 0; o < b.emb.out; ++o) {
      T s = T(0);
      for (std::size_t p = 0; p < plane; ++p) s += gs[o * plane + p];
      geb[o] += s;
      for (int k = 0; k < e; ++k) {
        gew[o * e + k] += s * emb_act[i * e + k];
        emb_act_grad[i * e + k] += s * ew[o * e + k];
      }
    }
  }

  BasicTensor<T> gx = conv_backward(b.conv1, apply_silu(cache.x), g_h1, true);
  auto gxd = gx.data();
  auto xd = cache.x.data();
  for (std::size_t k = 0; k < gxd.size(); ++k) gxd[k] *= silu_grad(xd[k]);
  if (b.has_skip) {
    add_into(gx, conv_backward(b.skip, cache.x, g, true));
  } else {
    add_into(gx, g);
  }
  return gx;
}

template <typename T>
BasicTensor<T> UNet<T>::forward(const BasicTensor<T>& input, std::span<const T> noise_cond) const {
  typename UNetCache<T>::BlockCache* none = nullptr;
  if (input.c() != config_.channels_in()) {
    throw ConfigError("network expects " + std::to_string(config_.channels_in()) + " input channels, got " +
                      std::to_string(input.c()));
  }
  config_.check_spatial(input.h(), input.w());
  if (static_cast<int>(noise_cond.size()) != input.n()) {
    throw ConfigError("one noise level per sample is required");
  }
  const std::vector<T> emb = embed(noise_cond, nullptr);
  BasicTensor<T> h = conv(in_conv_, input);
  std::vector<BasicTensor<T>> skips;
  for (const Block& b : enc_) {
    h = block(b, h, emb, none);
    skips.push_back(h);
    h = avg_pool(h);
  }
  h = block(mid_, h, emb, none);
  for (int l = config_.depth - 1; l >= 0; --l) {
    h = block(dec_[l], concat(upsample(h), skips[l]), emb, none);
  }
  return conv(out_conv_, apply_silu(h));
}

template <typename T>
BasicTensor<T> UNet<T>::forward(const BasicTensor<T>& input, std::span<const T> noise_cond,
                                UNetCache<T>& cache) const {
  if (input.c() != config_.channels_in()) {
    throw ConfigError("network expects " + std::to_string(config_.channels_in()) + " input channels, got " +
                      std::to_string(input.c()));
  }
  config_.check_spatial(input.h(), input.w());
  if (static_cast<int>(noise_cond.size()) != input.n()) {
    throw ConfigError("one noise level per sample is required");
  }
  const int d = config_.depth;
  cache.input = input;
  cache.blocks.assign(2 * d + 1, {});
  const std::vector<T> emb = embed(noise_cond, &cache);
  BasicTensor<T> h = conv(in_conv_, input);
  std::vector<BasicTensor<T>> skips;
  for (int l = 0; l < d; ++l) {
    h = block(enc_[l], h, emb, &cache.blocks[l]);
    skips.push_back(h);
    h = avg_pool(h);
  }
  h = block(mid_, h, emb, &cache.blocks[d]);
  for (int l = d - 1; l >= 0; --l) {
    h = block(dec_[l], concat(upsample(h), skips[l]), emb, &cache.blocks[d + 1 + l]);
  }
  cache.final_h = h;
  return conv(out_conv_, apply_silu(h));
}

template <typename T>
void UNet<T>::backward(const UNetCache<T>& cache, const BasicTensor<T>& grad_out) {
  const int d = config_.depth;
  const int n = cache.input.n();
  const int e = config_.embedding_dim;
  std::vector<T> g_emb(static_cast<std::size_t>(n) * e, T(0));

  BasicTensor<T> g = conv_backward(out_conv_, apply_silu(cache.final_h), grad_out, true);
  {
    auto gd = g.data();
    auto hd = cache.final_h.data();
    for (std::size_t k = 0; k < gd.size(); ++k) gd[k] *= silu_grad(hd[k]);
  }
  std::vector<BasicTensor<T>> g_skip(d);
  for (int l = 0; l < d; ++l) {
    BasicTensor<T> gc = block_backward(dec_[l], cache.blocks[d + 1 + l], cache.emb_act, g_emb, g);
    const int up_channels = gc.c() - config_.level_width(l);
    auto [g_up, g_s] = split(gc, up_channels);
    g_skip[l] = std::move(g_s);
    g = upsample_backward(g_up);
  }
  g = block_backward(mid_, cache.blocks[d], cache.emb_act, g_emb, g);
  for (int l = d - 1; l >= 0; --l) {
    g = avg_pool_backward(g);
    add_into(g, g_skip[l]);
    g = block_backward(enc_[l], cache.blocks[l], cache.emb_act, g_emb, g);
  }
  conv_backward(in_conv_, cache.input, g, false);

  // Embedding MLP.
  for (std::size_t k = 0; k < g_emb.size(); ++k) g_emb[k] *= silu_grad(cache.emb_e[k]);
  auto linear_backward = [&](const Linear& l, const std::vector<T>& in, const std::vector<T>& gout,
                             bool need_input) {
    CMapMat<T> wm(params_[l.w].value.data(), l.out, l.in);
    MapMat<T> gw(params_[l.w].grad.data(), l.out, l.in);
    CMapMat<T> im(in.data(), n, l.in);
    CMapMat<T> gm(gout.data(), n, l.out);
    product(gw, gm.transpose(), im, true);
    auto& gb = params_[l.b].grad;
    for (int o = 0; o < l.out; ++o) gb[o] += ordered_sum<T>(gm.col(o));
    std::vector<T> gin;
    if (need_input) {
      gin.assign(static_cast<std::size_t>(n) * l.in, T(0));
      MapMat<T> gi(gin.data(), n, l.in);
      product(gi, gm, wm, false);
    }
    return gin;
  };
  std::vector<T> a1 = cache.emb_z1;
  for (T& v : a1) v = silu(v);
  std::vector<T> g_a1 = linear_backward(emb2_, a1, g_emb, true);
  for (std::size_t k = 0; k < g_a1.size(); ++k) g_a1[k] *= silu_grad(cache.emb_z1[k]);
  linear_backward(emb1_, cache.emb0, g_a1, false);
}

template class UNet<float>;
template class UNet<double>;

}  // namespace pdo
