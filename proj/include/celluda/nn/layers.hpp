#pragma once

#include <celluda/errors.hpp>
#include <celluda/nn/tensor.hpp>
#include <celluda/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

namespace celluda::nn {

struct ConvShape
{
    int in_channels = 1;
    int out_channels = 1;
    int kernel = 3;
    int stride = 1;
    int pad = 1;

    int out_extent(int n) const { return (n + 2 * pad - kernel) / stride + 1; }
    bool pointwise() const { return kernel == 1 && stride == 1 && pad == 0; }
};

/// Unfolds output rows [oy0, oy1) of a convolution over x into
/// (in_channels * k * k) x ((oy1 - oy0) * out_w), so that band of the
/// convolution becomes one matrix product.
template <class Scalar>
void im2col_rows(const Tensor<Scalar>& x, const ConvShape& g, int oy0, int oy1, Matrix<Scalar>& col)
{
    const int k = g.kernel, s = g.stride, p = g.pad;
    const int h = x.height, w = x.width;
    const int ow = g.out_extent(w);
    col.resize(Eigen::Index(x.channels) * k * k, Eigen::Index(oy1 - oy0) * ow);

    for (int c = 0; c < x.channels; ++c) {
        const Scalar* src = x.data.row(c).data();
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                Scalar* dst = col.row((Eigen::Index(c) * k + ky) * k + kx).data();
                for (int oy = oy0; oy < oy1; ++oy) {
                    Scalar* d = dst + Eigen::Index(oy - oy0) * ow;
                    const int iy = oy * s - p + ky;
                    if (iy < 0 || iy >= h) {
                        std::fill(d, d + ow, Scalar(0));
                        continue;
                    }
                    const Scalar* srow = src + Eigen::Index(iy) * w;
                    if (s == 1) {
                        const int lo = std::clamp(p - kx, 0, ow);
                        const int hi = std::clamp(w + p - kx, lo, ow);
                        std::fill(d, d + lo, Scalar(0));
                        std::memcpy(d + lo, srow + (lo - p + kx), sizeof(Scalar) * (hi - lo));
                        std::fill(d + hi, d + ow, Scalar(0));
                    } else {
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * s - p + kx;
                            d[ox] = (ix >= 0 && ix < w) ? srow[ix] : Scalar(0);
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of im2col_rows: adds the band's columns back onto dx.
template <class Scalar>
void col2im_rows_add(const Matrix<Scalar>& col, const ConvShape& g, int oy0, int oy1, Tensor<Scalar>& dx)
{
    const int k = g.kernel, s = g.stride, p = g.pad;
    const int h = dx.height, w = dx.width;
    const int ow = g.out_extent(w);

    for (int c = 0; c < dx.channels; ++c) {
        Scalar* dst = dx.data.row(c).data();
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const Scalar* src = col.row((Eigen::Index(c) * k + ky) * k + kx).data();
                for (int oy = oy0; oy < oy1; ++oy) {
                    const int iy = oy * s - p + ky;
                    if (iy < 0 || iy >= h) continue;
                    const Scalar* srow = src + Eigen::Index(oy - oy0) * ow;
                    Scalar* drow = dst + Eigen::Index(iy) * w;
                    if (s == 1) {
                        const int lo = std::clamp(p - kx, 0, ow);
                        const int hi = std::clamp(w + p - kx, lo, ow);
                        Scalar* d = drow + (lo - p + kx);
                        for (int ox = lo; ox < hi; ++ox) *d++ += srow[ox];
                    } else {
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * s - p + kx;
                            if (ix >= 0 && ix < w) drow[ix] += srow[ox];
                        }
                    }
                }
            }
        }
    }
}

template <class Scalar>
void he_normal(Param<Scalar>& p, int fan_in, Rng& rng, double gain = 1.0)
{
    const double std = gain * std::sqrt(2.0 / fan_in);
    for (Eigen::Index i = 0; i < p.value.size(); ++i)
        p.value.data()[i] = static_cast<Scalar>(std * standard_normal(rng));
}

/// 2-D convolution with bias. Weights are out x (in * k * k).
///
/// The unfolded input is built in bands of output rows that stay in cache;
/// backward() rebuilds the bands from the layer input instead of storing them.
template <class Scalar>
class Conv2d
{
public:
    Conv2d() = default;
    Conv2d(const ConvShape& g, const std::string& name)
        : weight(name + ".weight", g.out_channels, Eigen::Index(g.in_channels) * g.kernel * g.kernel),
          bias(name + ".bias", g.out_channels, 1), shape_(g)
    {}

    const ConvShape& shape() const { return shape_; }
    int fan_in() const { return shape_.in_channels * shape_.kernel * shape_.kernel; }

    Tensor<Scalar> forward(const Tensor<Scalar>& x) const
    {
        if (x.channels != shape_.in_channels)
            throw UsageError("Conv2d " + weight.name + ": expected " + std::to_string(shape_.in_channels)
                             + " input channels, got " + std::to_string(x.channels));
        const int oh = shape_.out_extent(x.height), ow = shape_.out_extent(x.width);
        Tensor<Scalar> y(shape_.out_channels, oh, ow);
        if (shape_.pointwise()) {
            y.data.noalias() = weight.value * x.data;
        } else {
            Matrix<Scalar> col;
            const int band = band_rows(ow);
            for (int r0 = 0; r0 < oh; r0 += band) {
                const int r1 = std::min(oh, r0 + band);
                im2col_rows(x, shape_, r0, r1, col);
                y.data.middleCols(Eigen::Index(r0) * ow, Eigen::Index(r1 - r0) * ow).noalias() = weight.value * col;
            }
        }
        y.data.colwise() += bias.value.col(0);
        return y;
    }

    /// Accumulates weight/bias gradients given the forward input x; returns
    /// dL/dx (empty when not requested).
    Tensor<Scalar> backward(const Tensor<Scalar>& x, const Tensor<Scalar>& dy, bool input_grad = true)
    {
        bias.grad.col(0) += dy.data.rowwise().sum();
        if (shape_.pointwise()) {
            weight.grad.noalias() += dy.data * x.data.transpose();
            if (!input_grad) return {};
            Tensor<Scalar> dx(x.channels, x.height, x.width);
            dx.data.noalias() = weight.value.transpose() * dy.data;
            return dx;
        }
        const int oh = dy.height, ow = dy.width;
        Tensor<Scalar> dx;
        if (input_grad) dx = Tensor<Scalar>::zeros(x.channels, x.height, x.width);
        Matrix<Scalar> col, dcol;
        const int band = band_rows(ow);
        for (int r0 = 0; r0 < oh; r0 += band) {
            const int r1 = std::min(oh, r0 + band);
            const auto dy_band = dy.data.middleCols(Eigen::Index(r0) * ow, Eigen::Index(r1 - r0) * ow);
            im2col_rows(x, shape_, r0, r1, col);
            weight.grad.noalias() += dy_band * col.transpose();
            if (input_grad) {
                dcol.noalias() = weight.value.transpose() * dy_band;
                col2im_rows_add(dcol, shape_, r0, r1, dx);
            }
        }
        return dx;
    }

    Param<Scalar> weight;
    Param<Scalar> bias;

private:
    static int band_rows(int out_width) { return std::max(1, 512 / std::max(1, out_width)); }

    ConvShape shape_;
};

/// Transposed 2x2 convolution with stride 2 (exact 2x upsampling).
/// Weights are (out * 4) x in; row (o * 4 + dy * 2 + dx) feeds output
/// sub-pixel (dy, dx) of channel o.
template <class Scalar>
class UpConv2x2
{
public:
    UpConv2x2() = default;
    UpConv2x2(int in_channels, int out_channels, const std::string& name)
        : weight(name + ".weight", Eigen::Index(out_channels) * 4, in_channels), bias(name + ".bias", out_channels, 1),
          in_(in_channels), out_(out_channels)
    {}

    int fan_in() const { return in_; }

    Tensor<Scalar> forward(const Tensor<Scalar>& x) const
    {
        const int h = x.height, w = x.width;
        const Matrix<Scalar> z = weight.value * x.data;
        Tensor<Scalar> y(out_, 2 * h, 2 * w);
        for (int o = 0; o < out_; ++o) {
            Scalar* yo = y.data.row(o).data();
            const Scalar b = bias.value(o, 0);
            for (int sub = 0; sub < 4; ++sub) {
                const int dy = sub / 2, dx = sub % 2;
                const Scalar* zr = z.row(Eigen::Index(o) * 4 + sub).data();
                for (int i = 0; i < h; ++i) {
                    Scalar* dst = yo + Eigen::Index(2 * i + dy) * (2 * w) + dx;
                    const Scalar* src = zr + Eigen::Index(i) * w;
                    for (int j = 0; j < w; ++j) dst[2 * j] = src[j] + b;
                }
            }
        }
        return y;
    }

    Tensor<Scalar> backward(const Tensor<Scalar>& x, const Tensor<Scalar>& dy_full)
    {
        const int h = x.height, w = x.width;
        Matrix<Scalar> dz(Eigen::Index(out_) * 4, Eigen::Index(h) * w);
        for (int o = 0; o < out_; ++o) {
            const Scalar* go = dy_full.data.row(o).data();
            for (int sub = 0; sub < 4; ++sub) {
                const int dy = sub / 2, dx = sub % 2;
                Scalar* zr = dz.row(Eigen::Index(o) * 4 + sub).data();
                for (int i = 0; i < h; ++i) {
                    const Scalar* src = go + Eigen::Index(2 * i + dy) * (2 * w) + dx;
                    Scalar* dst = zr + Eigen::Index(i) * w;
                    for (int j = 0; j < w; ++j) dst[j] = src[2 * j];
                }
            }
        }
        weight.grad.noalias() += dz * x.data.transpose();
        bias.grad.col(0) += dy_full.data.rowwise().sum();
        Tensor<Scalar> dx(in_, h, w);
        dx.data.noalias() = weight.value.transpose() * dz;
        return dx;
    }

    Param<Scalar> weight;
    Param<Scalar> bias;

private:
    int in_ = 0;
    int out_ = 0;
};

struct PoolShape
{
    int kernel = 2;
    int stride = 2;
    int pad = 0;

    int out_extent(int n) const { return (n + 2 * pad - kernel) / stride + 1; }
};

/// Max pooling; `argmax` receives the winning flat index in the input plane.
template <class Scalar>
Tensor<Scalar> max_pool(const Tensor<Scalar>& x, const PoolShape& g, std::vector<int>* argmax)
{
    const int oh = g.out_extent(x.height), ow = g.out_extent(x.width);
    Tensor<Scalar> y(x.channels, oh, ow);
    if (argmax) argmax->assign(static_cast<std::size_t>(x.channels) * oh * ow, 0);
    for (int c = 0; c < x.channels; ++c) {
        const Scalar* src = x.data.row(c).data();
        Scalar* dst = y.data.row(c).data();
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                Scalar best = -std::numeric_limits<Scalar>::infinity();
                int best_idx = -1;
                for (int ky = 0; ky < g.kernel; ++ky) {
                    const int iy = oy * g.stride - g.pad + ky;
                    if (iy < 0 || iy >= x.height) continue;
                    for (int kx = 0; kx < g.kernel; ++kx) {
                        const int ix = ox * g.stride - g.pad + kx;
                        if (ix < 0 || ix >= x.width) continue;
                        const int idx = iy * x.width + ix;
                        if (best_idx < 0 || src[idx] > best) {
                            best = src[idx];
                            best_idx = idx;
                        }
                    }
                }
                const int o = oy * ow + ox;
                dst[o] = best;
                if (argmax) (*argmax)[static_cast<std::size_t>(c) * oh * ow + o] = best_idx;
            }
        }
    }
    return y;
}

template <class Scalar>
Tensor<Scalar> max_pool_backward(const Tensor<Scalar>& dy, const std::vector<int>& argmax, int in_h, int in_w)
{
    Tensor<Scalar> dx = Tensor<Scalar>::zeros(dy.channels, in_h, in_w);
    const Eigen::Index n = dy.plane();
    for (int c = 0; c < dy.channels; ++c) {
        const Scalar* g = dy.data.row(c).data();
        Scalar* d = dx.data.row(c).data();
        const int* idx = argmax.data() + Eigen::Index(c) * n;
        for (Eigen::Index o = 0; o < n; ++o) d[idx[o]] += g[o];
    }
    return dx;
}

template <class Scalar>
void relu_inplace(Tensor<Scalar>& x)
{
    x.data = x.data.cwiseMax(Scalar(0));
}

/// Masks dy by the ReLU output y (gradient passes where y > 0).
template <class Scalar>
void relu_backward_inplace(const Tensor<Scalar>& y, Tensor<Scalar>& dy)
{
    dy.data = (y.data.array() > Scalar(0)).select(dy.data, Scalar(0));
}

/// Inverted dropout: zeroes each element with probability `rate` and scales
/// survivors by 1 / (1 - rate). `mask` receives the multiplier.
template <class Scalar>
void dropout_inplace(Tensor<Scalar>& x, double rate, Rng& rng, Matrix<Scalar>* mask)
{
    if (rate <= 0.0) {
        if (mask) mask->setOnes(x.data.rows(), x.data.cols());
        return;
    }
    const Scalar keep = static_cast<Scalar>(1.0 / (1.0 - rate));
    Matrix<Scalar> m(x.data.rows(), x.data.cols());
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform01(rng) < rate ? Scalar(0) : keep;
    x.data.array() *= m.array();
    if (mask) *mask = std::move(m);
}

template <class Scalar>
Tensor<Scalar> concat_channels(const Tensor<Scalar>& a, const Tensor<Scalar>& b)
{
    if (a.height != b.height || a.width != b.width) throw UsageError("concat_channels: spatial shape mismatch");
    Tensor<Scalar> y(a.channels + b.channels, a.height, a.width);
    y.data.topRows(a.channels) = a.data;
    y.data.bottomRows(b.channels) = b.data;
    return y;
}

} // namespace celluda::nn
