#include "plr/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "plr/error.hpp"

namespace plr::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstStrided = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using Strided = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;

// im2col buffers are processed in row bands of at most this many elements so
// large inputs (512x512, 192 channels) do not need a gigabyte-sized buffer.
constexpr std::size_t kColumnBudget = std::size_t{1} << 21;

struct ConvGeometry {
  std::size_t in_ch, out_ch, k, pad, height, width, patch;  // patch = in_ch * k * k

  std::size_t band_rows() const {
    const std::size_t per_row = patch * width;
    return std::clamp<std::size_t>(kColumnBudget / std::max<std::size_t>(per_row, 1), 1, height);
  }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& weight) {
  const Shape& s = input.shape();
  const Shape& ws = weight.shape();
  require(ws.c == s.c, ErrorCode::kShapeMismatch,
          "conv2d: weight expects " + std::to_string(ws.c) + " input channels, got " + std::to_string(s.c));
  require(ws.h == ws.w && ws.h % 2 == 1, ErrorCode::kShapeMismatch, "conv2d: kernel must be square and odd");
  return {s.c, ws.n, ws.h, ws.h / 2, s.h, s.w, s.c * ws.h * ws.w};
}

// Columns for output rows [row0, row0 + rows) of one sample: (patch x rows*width).
template <typename T>
void im2col(const T* x, const ConvGeometry& g, std::size_t row0, std::size_t rows, T* cols) {
  const std::size_t p = rows * g.width;
  const auto W = static_cast<std::ptrdiff_t>(g.width);
  const auto H = static_cast<std::ptrdiff_t>(g.height);
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    const T* plane = x + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* dst = cols + ((c * g.k + ky) * g.k + kx) * p;
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(W, W - shift);
        for (std::size_t r = 0; r < rows; ++r) {
          T* d = dst + r * g.width;
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(row0 + r + ky) - pad;
          if (sy < 0 || sy >= H || hi <= lo) {
            std::fill(d, d + g.width, T{0});
            continue;
          }
          const T* src = plane + sy * W;
          std::fill(d, d + lo, T{0});
          std::memcpy(d + lo, src + lo + shift, static_cast<std::size_t>(hi - lo) * sizeof(T));
          std::fill(d + hi, d + W, T{0});
        }
      }
    }
  }
}

// Scatter-add of column gradients back onto the input rows they were read from.
template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, std::size_t row0, std::size_t rows, T* x) {
  const std::size_t p = rows * g.width;
  const auto W = static_cast<std::ptrdiff_t>(g.width);
  const auto H = static_cast<std::ptrdiff_t>(g.height);
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    T* plane = x + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* src = cols + ((c * g.k + ky) * g.k + kx) * p;
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kx) - pad;
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(W, W - shift);
        for (std::size_t r = 0; r < rows; ++r) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(row0 + r + ky) - pad;
          if (sy < 0 || sy >= H) continue;
          const T* s = src + r * g.width;
          T* d = plane + sy * W;
          for (std::ptrdiff_t xx = lo; xx < hi; ++xx) d[xx + shift] += s[xx];
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  const ConvGeometry g = conv_geometry(input, weight);
  check_shape(bias.shape(), {g.out_ch, 1, 1, 1}, "conv2d bias");
  const Shape& s = input.shape();
  Tensor<T> out({s.n, g.out_ch, s.h, s.w});
  const std::size_t hw = s.h * s.w;
  const std::size_t band = g.band_rows();
  std::vector<T> cols(g.patch * band * s.w);
  const ConstStrided<T> wmat(weight.data(), static_cast<Eigen::Index>(g.out_ch),
                             static_cast<Eigen::Index>(g.patch), Eigen::OuterStride<>(static_cast<Eigen::Index>(g.patch)));

  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t row0 = 0; row0 < s.h; row0 += band) {
      const std::size_t rows = std::min(band, s.h - row0);
      const std::size_t p = rows * s.w;
      im2col(input.plane(n, 0), g, row0, rows, cols.data());
      const ConstStrided<T> cmat(cols.data(), static_cast<Eigen::Index>(g.patch), static_cast<Eigen::Index>(p),
                                 Eigen::OuterStride<>(static_cast<Eigen::Index>(p)));
      Strided<T> omat(out.plane(n, 0) + row0 * s.w, static_cast<Eigen::Index>(g.out_ch),
                      static_cast<Eigen::Index>(p), Eigen::OuterStride<>(static_cast<Eigen::Index>(hw)));
      omat.noalias() = wmat * cmat;
      for (std::size_t o = 0; o < g.out_ch; ++o) omat.row(static_cast<Eigen::Index>(o)).array() += bias[o];
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out,
                             bool want_input_grad) {
  const ConvGeometry g = conv_geometry(input, weight);
  const Shape& s = input.shape();
  check_shape(grad_out.shape(), {s.n, g.out_ch, s.h, s.w}, "conv2d grad_out");

  ConvGrads<T> grads;
  grads.weight = Tensor<T>(weight.shape());
  grads.bias = Tensor<T>({g.out_ch, 1, 1, 1});
  if (want_input_grad) grads.input = Tensor<T>(s);

  const std::size_t hw = s.h * s.w;
  const std::size_t band = g.band_rows();
  std::vector<T> cols(g.patch * band * s.w);
  std::vector<T> gcols(want_input_grad ? cols.size() : 0);
  const ConstStrided<T> wmat(weight.data(), static_cast<Eigen::Index>(g.out_ch),
                             static_cast<Eigen::Index>(g.patch), Eigen::OuterStride<>(static_cast<Eigen::Index>(g.patch)));
  Strided<T> gw(grads.weight.data(), static_cast<Eigen::Index>(g.out_ch), static_cast<Eigen::Index>(g.patch),
                Eigen::OuterStride<>(static_cast<Eigen::Index>(g.patch)));

  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t row0 = 0; row0 < s.h; row0 += band) {
      const std::size_t rows = std::min(band, s.h - row0);
      const std::size_t p = rows * s.w;
      im2col(input.plane(n, 0), g, row0, rows, cols.data());
      const ConstStrided<T> cmat(cols.data(), static_cast<Eigen::Index>(g.patch), static_cast<Eigen::Index>(p),
                                 Eigen::OuterStride<>(static_cast<Eigen::Index>(p)));
      const ConstStrided<T> gmat(grad_out.plane(n, 0) + row0 * s.w, static_cast<Eigen::Index>(g.out_ch),
                                 static_cast<Eigen::Index>(p), Eigen::OuterStride<>(static_cast<Eigen::Index>(hw)));
      gw.noalias() += gmat * cmat.transpose();
      for (std::size_t o = 0; o < g.out_ch; ++o) grads.bias[o] += gmat.row(static_cast<Eigen::Index>(o)).sum();
      if (want_input_grad) {
        Strided<T> gc(gcols.data(), static_cast<Eigen::Index>(g.patch), static_cast<Eigen::Index>(p),
                      Eigen::OuterStride<>(static_cast<Eigen::Index>(p)));
        gc.noalias() = wmat.transpose() * gmat;
        col2im_add(gcols.data(), g, row0, rows, grads.input.plane(n, 0));
      }
    }
  }
  return grads;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output, const Tensor<T>& grad_out) {
  check_shape(grad_out.shape(), output.shape(), "relu grad_out");
  Tensor<T> g(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) g[i] = output[i] > T{0} ? grad_out[i] : T{0};
  return g;
}

template <typename T>
PoolResult<T> maxpool2(const Tensor<T>& x) {
  const Shape& s = x.shape();
  require(s.h % 2 == 0 && s.w % 2 == 0, ErrorCode::kShapeMismatch,
          "maxpool2 needs even spatial dims, got " + s.str());
  PoolResult<T> r;
  r.output = Tensor<T>({s.n, s.c, s.h / 2, s.w / 2});
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t base = (n * s.c + c) * s.plane();
      for (std::size_t y = 0; y < s.h; y += 2) {
        for (std::size_t xx = 0; xx < s.w; xx += 2, ++o) {
          std::size_t best = base + y * s.w + xx;
          for (const std::size_t cand : {best + 1, best + s.w, best + s.w + 1}) {
            if (x[cand] > x[best]) best = cand;
          }
          r.output[o] = x[best];
          r.argmax[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool2_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                            const Tensor<T>& grad_out) {
  require(argmax.size() == grad_out.size(), ErrorCode::kShapeMismatch, "maxpool2 grad_out size mismatch");
  Tensor<T> g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_out[i];
  return g;
}

template <typename T>
Tensor<T> upsample_nearest2(const Tensor<T>& x) {
  const Shape& s = x.shape();
  Tensor<T> y({s.n, s.c, s.h * 2, s.w * 2});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* src = x.plane(n, c);
      T* dst = y.plane(n, c);
      for (std::size_t yy = 0; yy < s.h * 2; ++yy) {
        const T* row = src + (yy / 2) * s.w;
        T* out = dst + yy * s.w * 2;
        for (std::size_t xx = 0; xx < s.w * 2; ++xx) out[xx] = row[xx / 2];
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample_nearest2_backward(const Tensor<T>& grad_out) {
  const Shape& s = grad_out.shape();
  require(s.h % 2 == 0 && s.w % 2 == 0, ErrorCode::kShapeMismatch, "upsample grad needs even dims");
  Tensor<T> g({s.n, s.c, s.h / 2, s.w / 2});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* src = grad_out.plane(n, c);
      T* dst = g.plane(n, c);
      for (std::size_t yy = 0; yy < s.h; ++yy) {
        for (std::size_t xx = 0; xx < s.w; ++xx) dst[(yy / 2) * (s.w / 2) + xx / 2] += src[yy * s.w + xx];
      }
    }
  }
  return g;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  require(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w, ErrorCode::kShapeMismatch,
          "concat_channels: " + sa.str() + " vs " + sb.str());
  Tensor<T> y({sa.n, sa.c + sb.c, sa.h, sa.w});
  const std::size_t pa = sa.c * sa.plane(), pb = sb.c * sb.plane();
  for (std::size_t n = 0; n < sa.n; ++n) {
    std::copy_n(a.plane(n, 0), pa, y.plane(n, 0));
    std::copy_n(b.plane(n, 0), pb, y.plane(n, sa.c));
  }
  return y;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> concat_channels_backward(const Tensor<T>& grad_out, std::size_t a_channels) {
  const Shape& s = grad_out.shape();
  require(a_channels <= s.c, ErrorCode::kShapeMismatch, "concat split beyond channel count");
  Tensor<T> ga({s.n, a_channels, s.h, s.w});
  Tensor<T> gb({s.n, s.c - a_channels, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    std::copy_n(grad_out.plane(n, 0), a_channels * s.plane(), ga.plane(n, 0));
    std::copy_n(grad_out.plane(n, a_channels), (s.c - a_channels) * s.plane(), gb.plane(n, 0));
  }
  return {std::move(ga), std::move(gb)};
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  const Shape& s = x.shape();
  Tensor<T> y({s.n, s.c, 1, 1});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* p = x.plane(n, c);
      T sum{0};
      for (std::size_t i = 0; i < s.plane(); ++i) sum += p[i];
      y.at(n, c, 0, 0) = sum / static_cast<T>(s.plane());
    }
  }
  return y;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Shape& input_shape, const Tensor<T>& grad_out) {
  check_shape(grad_out.shape(), {input_shape.n, input_shape.c, 1, 1}, "global_avg_pool grad_out");
  Tensor<T> g(input_shape);
  const T scale = T{1} / static_cast<T>(input_shape.plane());
  for (std::size_t n = 0; n < input_shape.n; ++n) {
    for (std::size_t c = 0; c < input_shape.c; ++c) {
      const T v = grad_out.at(n, c, 0, 0) * scale;
      std::fill_n(g.plane(n, c), input_shape.plane(), v);
    }
  }
  return g;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  const Shape& s = input.shape();
  const Shape& ws = weight.shape();
  const std::size_t features = s.c * s.h * s.w;
  require(ws.c == features && ws.h == 1 && ws.w == 1, ErrorCode::kShapeMismatch,
          "dense: weight " + ws.str() + " does not accept input " + s.str());
  check_shape(bias.shape(), {ws.n, 1, 1, 1}, "dense bias");
  Tensor<T> y({s.n, ws.n, 1, 1});
  const ConstStrided<T> x(input.data(), static_cast<Eigen::Index>(s.n), static_cast<Eigen::Index>(features),
                          Eigen::OuterStride<>(static_cast<Eigen::Index>(features)));
  const ConstStrided<T> w(weight.data(), static_cast<Eigen::Index>(ws.n), static_cast<Eigen::Index>(features),
                          Eigen::OuterStride<>(static_cast<Eigen::Index>(features)));
  Strided<T> out(y.data(), static_cast<Eigen::Index>(s.n), static_cast<Eigen::Index>(ws.n),
                 Eigen::OuterStride<>(static_cast<Eigen::Index>(ws.n)));
  out.noalias() = x * w.transpose();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t o = 0; o < ws.n; ++o) y[n * ws.n + o] += bias[o];
  }
  return y;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& grad_out) {
  const Shape& s = input.shape();
  const Shape& ws = weight.shape();
  const std::size_t features = s.c * s.h * s.w;
  check_shape(grad_out.shape(), {s.n, ws.n, 1, 1}, "dense grad_out");
  DenseGrads<T> grads{Tensor<T>(s), Tensor<T>(ws), Tensor<T>({ws.n, 1, 1, 1})};
  const auto N = static_cast<Eigen::Index>(s.n), F = static_cast<Eigen::Index>(features),
             O = static_cast<Eigen::Index>(ws.n);
  const ConstStrided<T> x(input.data(), N, F, Eigen::OuterStride<>(F));
  const ConstStrided<T> w(weight.data(), O, F, Eigen::OuterStride<>(F));
  const ConstStrided<T> g(grad_out.data(), N, O, Eigen::OuterStride<>(O));
  Strided<T> gx(grads.input.data(), N, F, Eigen::OuterStride<>(F));
  Strided<T> gw(grads.weight.data(), O, F, Eigen::OuterStride<>(F));
  gx.noalias() = g * w;
  gw.noalias() = g.transpose() * x;
  for (Eigen::Index o = 0; o < O; ++o) grads.bias[static_cast<std::size_t>(o)] = g.col(o).sum();
  return grads;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    // Branch on sign so exp never overflows.
    const T v = x[i];
    if (v >= T{0}) {
      y[i] = T{1} / (T{1} + std::exp(-v));
    } else {
      const T e = std::exp(v);
      y[i] = e / (T{1} + e);
    }
  }
  return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& output, const Tensor<T>& grad_out) {
  check_shape(grad_out.shape(), output.shape(), "sigmoid grad_out");
  Tensor<T> g(output.shape());
  for (std::size_t i = 0; i < output.size(); ++i) g[i] = grad_out[i] * output[i] * (T{1} - output[i]);
  return g;
}

#define PLR_INSTANTIATE_OPS(T)                                                                          \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template ConvGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, bool);     \
  template Tensor<T> relu(const Tensor<T>&);                                                             \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                                  \
  template PoolResult<T> maxpool2(const Tensor<T>&);                                                     \
  template Tensor<T> maxpool2_backward(const Shape&, const std::vector<std::uint32_t>&, const Tensor<T>&); \
  template Tensor<T> upsample_nearest2(const Tensor<T>&);                                                \
  template Tensor<T> upsample_nearest2_backward(const Tensor<T>&);                                       \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);                                \
  template std::pair<Tensor<T>, Tensor<T>> concat_channels_backward(const Tensor<T>&, std::size_t);      \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                                  \
  template Tensor<T> global_avg_pool_backward(const Shape&, const Tensor<T>&);                           \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                        \
  template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                          \
  template Tensor<T> sigmoid_backward(const Tensor<T>&, const Tensor<T>&);

PLR_INSTANTIATE_OPS(float)
PLR_INSTANTIATE_OPS(double)

#undef PLR_INSTANTIATE_OPS

}  // namespace plr::nn
