#pragma once

#include <celluda/nn/layers.hpp>

#include <string>
#include <vector>

namespace celluda::nn {

struct UNetConfig
{
    int in_channels = 1;
    int levels = 4;
    int base_width = 32;

    int width(int level) const { return base_width << level; }
};

/// Encoder-decoder with skip connections: per level two 3x3 conv + ReLU,
/// 2x2 max-pool down, 2x2 transposed conv up, concatenation with the skip,
/// and a linear 1x1 head producing one channel.
template <class Scalar>
class UNet
{
public:
    struct Trace
    {
        std::vector<Tensor<Scalar>> enc_in, cat;
        std::vector<Tensor<Scalar>> enc_a_out, enc_b_out, dec_a_out, dec_b_out;
        std::vector<std::vector<int>> pool_idx;
    };

    UNet() = default;

    explicit UNet(const UNetConfig& cfg) : cfg_(cfg)
    {
        if (cfg.levels < 1 || cfg.base_width < 1 || cfg.in_channels < 1)
            throw UsageError("UNet: levels, base_width and in_channels must be positive");
        const int L = cfg.levels;
        for (int i = 0; i < L; ++i) {
            const int in = i == 0 ? cfg.in_channels : cfg.width(i - 1);
            const std::string n = "enc" + std::to_string(i);
            enc_a_.emplace_back(ConvShape{in, cfg.width(i), 3, 1, 1}, n + ".a");
            enc_b_.emplace_back(ConvShape{cfg.width(i), cfg.width(i), 3, 1, 1}, n + ".b");
        }
        for (int i = 0; i + 1 < L; ++i) {
            const std::string n = "dec" + std::to_string(i);
            up_.emplace_back(cfg.width(i + 1), cfg.width(i), n + ".up");
            dec_a_.emplace_back(ConvShape{2 * cfg.width(i), cfg.width(i), 3, 1, 1}, n + ".a");
            dec_b_.emplace_back(ConvShape{cfg.width(i), cfg.width(i), 3, 1, 1}, n + ".b");
        }
        head_ = Conv2d<Scalar>(ConvShape{cfg.width(0), 1, 1, 1, 0}, "head");
    }

    const UNetConfig& config() const { return cfg_; }

    std::string fingerprint() const
    {
        return "unet/v1/in=" + std::to_string(cfg_.in_channels) + "/levels=" + std::to_string(cfg_.levels)
            + "/width=" + std::to_string(cfg_.base_width);
    }

    void initialize(Rng& rng)
    {
        for (auto* c : convs()) {
            he_normal(c->weight, c->fan_in(), rng);
            c->bias.value.setZero();
        }
        for (auto& u : up_) {
            he_normal(u.weight, u.fan_in(), rng);
            u.bias.value.setZero();
        }
        he_normal(head_.weight, head_.fan_in(), rng, 0.5);
        head_.bias.value.setZero();
    }

    std::vector<Param<Scalar>*> parameters()
    {
        std::vector<Param<Scalar>*> ps;
        for (int i = 0; i < cfg_.levels; ++i) {
            ps.push_back(&enc_a_[i].weight);
            ps.push_back(&enc_a_[i].bias);
            ps.push_back(&enc_b_[i].weight);
            ps.push_back(&enc_b_[i].bias);
        }
        for (std::size_t i = 0; i < up_.size(); ++i) {
            ps.push_back(&up_[i].weight);
            ps.push_back(&up_[i].bias);
            ps.push_back(&dec_a_[i].weight);
            ps.push_back(&dec_a_[i].bias);
            ps.push_back(&dec_b_[i].weight);
            ps.push_back(&dec_b_[i].bias);
        }
        ps.push_back(&head_.weight);
        ps.push_back(&head_.bias);
        return ps;
    }

    std::vector<const Param<Scalar>*> parameters() const
    {
        auto ps = const_cast<UNet*>(this)->parameters();
        return {ps.begin(), ps.end()};
    }

    /// Input spatial size must be divisible by 2^(levels-1). Pass a trace to
    /// keep what backward() needs.
    Tensor<Scalar> forward(const Tensor<Scalar>& x, Trace* trace) const
    {
        const int L = cfg_.levels;
        const int div = 1 << (L - 1);
        if (x.height % div != 0 || x.width % div != 0)
            throw UsageError("UNet: input size must be divisible by " + std::to_string(div));

        Trace local;
        Trace& t = trace ? *trace : local;
        t.enc_in.resize(L);
        t.enc_a_out.resize(L);
        t.enc_b_out.resize(L);
        t.pool_idx.resize(L);
        t.cat.resize(L - 1);
        t.dec_a_out.resize(L - 1);
        t.dec_b_out.resize(L - 1);

        for (int i = 0; i < L; ++i) {
            t.enc_in[i] = i == 0 ? x : max_pool(t.enc_b_out[i - 1], PoolShape{2, 2, 0}, &t.pool_idx[i]);
            t.enc_a_out[i] = enc_a_[i].forward(t.enc_in[i]);
            relu_inplace(t.enc_a_out[i]);
            t.enc_b_out[i] = enc_b_[i].forward(t.enc_a_out[i]);
            relu_inplace(t.enc_b_out[i]);
        }
        for (int i = L - 2; i >= 0; --i) {
            t.cat[i] = concat_channels(t.enc_b_out[i], up_[i].forward(deeper(t, i)));
            t.dec_a_out[i] = dec_a_[i].forward(t.cat[i]);
            relu_inplace(t.dec_a_out[i]);
            t.dec_b_out[i] = dec_b_[i].forward(t.dec_a_out[i]);
            relu_inplace(t.dec_b_out[i]);
        }
        return head_.forward(top(t));
    }

    /// Accumulates parameter gradients for dL/d(output).
    void backward(const Trace& t, const Tensor<Scalar>& dout)
    {
        const int L = cfg_.levels;
        Tensor<Scalar> g = head_.backward(top(t), dout);
        std::vector<Tensor<Scalar>> dskip(L);

        for (int i = 0; i + 1 < L; ++i) {
            relu_backward_inplace(t.dec_b_out[i], g);
            g = dec_b_[i].backward(t.dec_a_out[i], g);
            relu_backward_inplace(t.dec_a_out[i], g);
            g = dec_a_[i].backward(t.cat[i], g);
            const int wi = cfg_.width(i);
            dskip[i] = Tensor<Scalar>(wi, g.height, g.width, g.data.topRows(wi));
            const Tensor<Scalar> du(wi, g.height, g.width, g.data.bottomRows(wi));
            g = up_[i].backward(deeper(t, i), du);
        }
        // g now holds the gradient w.r.t. the bottleneck output.
        for (int i = L - 1; i >= 0; --i) {
            if (i < L - 1) g.data += dskip[i].data;
            relu_backward_inplace(t.enc_b_out[i], g);
            g = enc_b_[i].backward(t.enc_a_out[i], g);
            relu_backward_inplace(t.enc_a_out[i], g);
            g = enc_a_[i].backward(t.enc_in[i], g, i > 0);
            if (i > 0) {
                const Tensor<Scalar>& below = t.enc_b_out[i - 1];
                g = max_pool_backward(g, t.pool_idx[i], below.height, below.width);
            }
        }
    }

private:
    const Tensor<Scalar>& deeper(const Trace& t, int i) const
    {
        return (i == cfg_.levels - 2) ? t.enc_b_out[cfg_.levels - 1] : t.dec_b_out[i + 1];
    }

    const Tensor<Scalar>& top(const Trace& t) const
    {
        return cfg_.levels > 1 ? t.dec_b_out[0] : t.enc_b_out[0];
    }

    std::vector<Conv2d<Scalar>*> convs()
    {
        std::vector<Conv2d<Scalar>*> cs;
        for (auto& c : enc_a_) cs.push_back(&c);
        for (auto& c : enc_b_) cs.push_back(&c);
        for (auto& c : dec_a_) cs.push_back(&c);
        for (auto& c : dec_b_) cs.push_back(&c);
        return cs;
    }

    UNetConfig cfg_;
    std::vector<Conv2d<Scalar>> enc_a_, enc_b_;
    std::vector<UpConv2x2<Scalar>> up_;
    std::vector<Conv2d<Scalar>> dec_a_, dec_b_;
    Conv2d<Scalar> head_;
};

} // namespace celluda::nn
