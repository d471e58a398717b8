#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "conav/nhpm.hpp"

namespace conav::detail {

// Activations are stored channel-major over the whole batch: one row per
// channel, columns run over (sample, row, col).
template <typename T>
class ConvEngine {
 public:
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  explicit ConvEngine(const ConvModelParams& params) { set_params(params); }

  void set_params(const ConvModelParams& params) {
    layers_.resize(params.layers.size());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      const ConvLayer& src = params.layers[l];
      Layer& dst = layers_[l];
      dst.spec = src;
      dst.spec.weight.clear();
      dst.spec.bias.clear();
      dst.weight.resize(src.out_channels, src.in_channels * 9);
      for (int o = 0; o < src.out_channels; ++o)
        for (int k = 0; k < src.in_channels * 9; ++k)
          dst.weight(o, k) = static_cast<T>(src.weight[static_cast<std::size_t>(o) * src.in_channels * 9 + k]);
      dst.bias.resize(src.out_channels);
      for (int o = 0; o < src.out_channels; ++o) dst.bias(o) = static_cast<T>(src.bias[o]);
    }
  }

  // `input` holds n samples laid out [n][channels][h][w].
  const Matrix& forward(const float* input, int n, int h, int w) {
    n_ = n;
    const int channels = layers_.front().spec.in_channels;
    input_.resize(channels, static_cast<Eigen::Index>(n) * h * w);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int s = 0; s < n; ++s)
      for (int c = 0; c < channels; ++c)
        for (std::size_t p = 0; p < plane; ++p)
          input_(c, s * plane + p) = static_cast<T>(input[(static_cast<std::size_t>(s) * channels + c) * plane + p]);

    const Matrix* x = &input_;
    int xh = h, xw = w;
    for (Layer& layer : layers_) {
      const ConvLayer& spec = layer.spec;
      layer.in_h = xh;
      layer.in_w = xw;
      if (spec.upsample_to > 0) {
        upsample(*x, xh, xw, spec.upsample_to, spec.upsample_to, layer.upsampled);
        x = &layer.upsampled;
        xh = xw = spec.upsample_to;
      }
      layer.conv_h = xh;
      layer.conv_w = xw;
      layer.out_h = (xh - 1) / spec.stride + 1;
      layer.out_w = (xw - 1) / spec.stride + 1;
      im2col(*x, xh, xw, spec.stride, layer.out_h, layer.out_w, layer.col);
      layer.out.noalias() = layer.weight * layer.col;
      layer.out.colwise() += layer.bias;
      if (spec.activation == Activation::Relu) {
        layer.out = layer.out.cwiseMax(T(0));
      } else {
        layer.out = layer.out.unaryExpr([](T z) { return T(1) / (T(1) + std::exp(-z)); });
      }
      x = &layer.out;
      xh = layer.out_h;
      xw = layer.out_w;
    }
    return layers_.back().out;
  }

  // `dlogits` is d(objective)/d(pre-sigmoid output). Adds parameter
  // gradients to `grad`, laid out like ConvModelParams::flatten().
  void backward(const Matrix& dlogits, std::vector<double>& grad) {
    std::vector<std::size_t> offsets(layers_.size());
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      offsets[l] = offset;
      offset += layers_[l].spec.weight_count() + layers_[l].spec.out_channels;
    }
    Matrix dz = dlogits;
    Matrix dcol;
    Matrix dx;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      Layer& layer = layers_[l];
      const ConvLayer& spec = layer.spec;
      if (spec.activation == Activation::Relu) {
        dz = (layer.out.array() > T(0)).select(dz, T(0));
      }
      const Matrix dw = dz * layer.col.transpose();
      const Vector db = dz.rowwise().sum();
      double* g = grad.data() + offsets[l];
      for (int o = 0; o < dw.rows(); ++o)
        for (int k = 0; k < dw.cols(); ++k) *g++ += static_cast<double>(dw(o, k));
      for (int o = 0; o < db.size(); ++o) *g++ += static_cast<double>(db(o));
      if (l == 0) break;
      dcol.noalias() = layer.weight.transpose() * dz;
      col2im(dcol, layer.conv_h, layer.conv_w, spec.stride, layer.out_h, layer.out_w,
             spec.in_channels, dx);
      if (spec.upsample_to > 0) {
        Matrix down;
        downsample_grad(dx, layer.conv_h, layer.conv_w, layer.in_h, layer.in_w, down);
        dz.swap(down);
      } else {
        dz.swap(dx);
      }
    }
  }

  int samples() const { return n_; }

 private:
  struct Layer {
    ConvLayer spec;  // shape only
    Matrix weight;
    Vector bias;
    Matrix upsampled;
    Matrix col;
    Matrix out;
    int in_h = 0, in_w = 0, conv_h = 0, conv_w = 0, out_h = 0, out_w = 0;
  };

  static int source_index(int dst, int dst_size, int src_size) {
    return static_cast<int>(static_cast<long long>(dst) * src_size / dst_size);
  }

  void upsample(const Matrix& x, int h, int w, int th, int tw, Matrix& out) const {
    out.resize(x.rows(), static_cast<Eigen::Index>(n_) * th * tw);
    for (Eigen::Index c = 0; c < x.rows(); ++c)
      for (int s = 0; s < n_; ++s)
        for (int r = 0; r < th; ++r) {
          const int sr = source_index(r, th, h);
          for (int q = 0; q < tw; ++q) {
            out(c, (static_cast<Eigen::Index>(s) * th + r) * tw + q) =
                x(c, (static_cast<Eigen::Index>(s) * h + sr) * w + source_index(q, tw, w));
          }
        }
  }

  void downsample_grad(const Matrix& d, int th, int tw, int h, int w, Matrix& out) const {
    out.setZero(d.rows(), static_cast<Eigen::Index>(n_) * h * w);
    for (Eigen::Index c = 0; c < d.rows(); ++c)
      for (int s = 0; s < n_; ++s)
        for (int r = 0; r < th; ++r) {
          const int sr = source_index(r, th, h);
          for (int q = 0; q < tw; ++q) {
            out(c, (static_cast<Eigen::Index>(s) * h + sr) * w + source_index(q, tw, w)) +=
                d(c, (static_cast<Eigen::Index>(s) * th + r) * tw + q);
          }
        }
  }

  // Zero-padded 3x3 patches; row (c, ky, kx), column (sample, oy, ox).
  void im2col(const Matrix& x, int h, int w, int stride, int oh, int ow, Matrix& col) const {
    const Eigen::Index channels = x.rows();
    col.resize(channels * 9, static_cast<Eigen::Index>(n_) * oh * ow);
    for (Eigen::Index c = 0; c < channels; ++c) {
      const T* src = x.row(c).data();
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          T* dst = col.row(c * 9 + ky * 3 + kx).data();
          // Output columns whose input column ox*stride+kx-1 lies inside [0, w).
          const int lo = kx == 0 ? 1 : 0;
          const int hi = std::min(ow, (w - kx) / stride + 1);
          for (int s = 0; s < n_; ++s) {
            const T* plane = src + static_cast<std::size_t>(s) * h * w;
            for (int oy = 0; oy < oh; ++oy, dst += ow) {
              const int iy = oy * stride + ky - 1;
              if (iy < 0 || iy >= h) {
                std::fill(dst, dst + ow, T(0));
                continue;
              }
              const T* row = plane + static_cast<std::size_t>(iy) * w + (kx - 1);
              std::fill(dst, dst + lo, T(0));
              if (stride == 1) {
                std::copy(row + lo, row + hi, dst + lo);
              } else {
                for (int ox = lo; ox < hi; ++ox) dst[ox] = row[ox * stride];
              }
              std::fill(dst + std::max(lo, hi), dst + ow, T(0));
            }
          }
        }
    }
  }

  void col2im(const Matrix& col, int h, int w, int stride, int oh, int ow, int channels,
              Matrix& x) const {
    x.setZero(channels, static_cast<Eigen::Index>(n_) * h * w);
    for (int c = 0; c < channels; ++c) {
      T* dst = x.row(c).data();
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          const T* src = col.row(c * 9 + ky * 3 + kx).data();
          const int lo = kx == 0 ? 1 : 0;
          const int hi = std::min(ow, (w - kx) / stride + 1);
          for (int s = 0; s < n_; ++s) {
            T* plane = dst + static_cast<std::size_t>(s) * h * w;
            for (int oy = 0; oy < oh; ++oy, src += ow) {
              const int iy = oy * stride + ky - 1;
              if (iy < 0 || iy >= h) continue;
              T* row = plane + static_cast<std::size_t>(iy) * w + (kx - 1);
              if (stride == 1) {
                for (int ox = lo; ox < hi; ++ox) row[ox] += src[ox];
              } else {
                for (int ox = lo; ox < hi; ++ox) row[ox * stride] += src[ox];
              }
            }
          }
        }
    }
  }

  std::vector<Layer> layers_;
  Matrix input_;
  int n_ = 0;
};

}  // namespace conav::detail
