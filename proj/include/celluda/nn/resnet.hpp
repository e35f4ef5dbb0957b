#pragma once

#include <celluda/nn/layers.hpp>

#include <optional>
#include <string>
#include <vector>

namespace celluda::nn {

struct ResNetConfig
{
    int in_channels = 2;
    int base_width = 64;
    int blocks_per_stage = 2;
    double dropout = 0.3;

    int width(int stage) const { return base_width << stage; }
};

/// Eighteen-layer residual binary classifier without normalisation layers:
/// 7x7/2 stem, 3x3/2 max-pool, four stages of basic blocks (widths w, 2w,
/// 4w, 8w; stages 2-4 downsample by 2), global average pooling and a linear
/// logit. Dropout follows every stage and precedes the logit; it stays
/// active whenever a random generator is supplied, which is what Monte-Carlo
/// sampling relies on. The second convolution of each residual branch starts
/// at zero so every block is an identity map at initialisation.
template <class Scalar>
class ResNet
{
public:
    static constexpr int kStages = 4;

    struct BlockTrace
    {
        Tensor<Scalar> in, a, out;
    };

    struct Trace
    {
        Tensor<Scalar> input, stem_out;
        std::vector<int> pool_idx;
        std::vector<BlockTrace> blocks;
        std::vector<Matrix<Scalar>> stage_mask;
        Tensor<Scalar> pooled;
        Matrix<Scalar> fc_mask;
        Tensor<Scalar> fc_in;
        int last_h = 0, last_w = 0;
    };

    ResNet() = default;

    explicit ResNet(const ResNetConfig& cfg) : cfg_(cfg)
    {
        if (cfg.in_channels < 1 || cfg.base_width < 1 || cfg.blocks_per_stage < 1)
            throw UsageError("ResNet: in_channels, base_width and blocks_per_stage must be positive");
        if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) throw UsageError("ResNet: dropout must be in [0, 1)");
        stem_ = Conv2d<Scalar>(ConvShape{cfg.in_channels, cfg.width(0), 7, 2, 3}, "stem");
        for (int s = 0; s < kStages; ++s) {
            for (int b = 0; b < cfg.blocks_per_stage; ++b) {
                const int in = (b == 0 && s > 0) ? cfg.width(s - 1) : cfg.width(s);
                const int stride = (b == 0 && s > 0) ? 2 : 1;
                const std::string n = "stage" + std::to_string(s) + ".block" + std::to_string(b);
                Block blk;
                blk.a = Conv2d<Scalar>(ConvShape{in, cfg.width(s), 3, stride, 1}, n + ".a");
                blk.b = Conv2d<Scalar>(ConvShape{cfg.width(s), cfg.width(s), 3, 1, 1}, n + ".b");
                if (in != cfg.width(s) || stride != 1)
                    blk.proj = Conv2d<Scalar>(ConvShape{in, cfg.width(s), 1, stride, 0}, n + ".proj");
                blocks_.push_back(std::move(blk));
            }
        }
        fc_ = Conv2d<Scalar>(ConvShape{cfg.width(kStages - 1), 1, 1, 1, 0}, "fc");
    }

    const ResNetConfig& config() const { return cfg_; }
    void set_dropout(double rate) { cfg_.dropout = rate; }

    std::string fingerprint() const
    {
        return "resnet18/v1/in=" + std::to_string(cfg_.in_channels) + "/width=" + std::to_string(cfg_.base_width)
            + "/blocks=" + std::to_string(cfg_.blocks_per_stage);
    }

    void initialize(Rng& rng)
    {
        he_normal(stem_.weight, stem_.fan_in(), rng);
        stem_.bias.value.setZero();
        for (auto& blk : blocks_) {
            he_normal(blk.a.weight, blk.a.fan_in(), rng);
            blk.a.bias.value.setZero();
            blk.b.weight.value.setZero();
            blk.b.bias.value.setZero();
            if (blk.proj) {
                he_normal(blk.proj->weight, blk.proj->fan_in(), rng, std::sqrt(0.5));
                blk.proj->bias.value.setZero();
            }
        }
        he_normal(fc_.weight, fc_.fan_in(), rng, 0.1);
        fc_.bias.value.setZero();
    }

    std::vector<Param<Scalar>*> parameters()
    {
        std::vector<Param<Scalar>*> ps{&stem_.weight, &stem_.bias};
        for (auto& blk : blocks_) {
            ps.push_back(&blk.a.weight);
            ps.push_back(&blk.a.bias);
            ps.push_back(&blk.b.weight);
            ps.push_back(&blk.b.bias);
            if (blk.proj) {
                ps.push_back(&blk.proj->weight);
                ps.push_back(&blk.proj->bias);
            }
        }
        ps.push_back(&fc_.weight);
        ps.push_back(&fc_.bias);
        return ps;
    }

    std::vector<const Param<Scalar>*> parameters() const
    {
        auto ps = const_cast<ResNet*>(this)->parameters();
        return {ps.begin(), ps.end()};
    }

    /// Deterministic prefix: stem, max-pool and the first stage, before its
    /// dropout. Reused across Monte-Carlo passes.
    Tensor<Scalar> features(const Tensor<Scalar>& x) const
    {
        Tensor<Scalar> t = stem_.forward(x);
        relu_inplace(t);
        t = max_pool(t, PoolShape{3, 2, 1}, nullptr);
        for (int b = 0; b < cfg_.blocks_per_stage; ++b) t = block_forward(blocks_[b], t, nullptr);
        return t;
    }

    /// Logit from first-stage features; `rng` enables dropout.
    Scalar logit_from_features(Tensor<Scalar> t, Rng* rng) const
    {
        for (int s = 0; s < kStages; ++s) {
            if (s > 0) {
                for (int b = 0; b < cfg_.blocks_per_stage; ++b)
                    t = block_forward(blocks_[s * cfg_.blocks_per_stage + b], t, nullptr);
            }
            if (rng) dropout_inplace<Scalar>(t, cfg_.dropout, *rng, nullptr);
        }
        Tensor<Scalar> pooled(t.channels, 1, 1, t.data.rowwise().mean());
        if (rng) dropout_inplace<Scalar>(pooled, cfg_.dropout, *rng, nullptr);
        return fc_.forward(pooled).data(0, 0);
    }

    /// Full forward pass returning the logit. With `rng` dropout is sampled;
    /// with `trace` everything backward() needs is kept.
    Scalar forward(const Tensor<Scalar>& x, Rng* rng, Trace* trace) const
    {
        if (!trace) return logit_from_features(features(x), rng);
        Trace& tr = *trace;
        tr.input = x;
        tr.stem_out = stem_.forward(x);
        relu_inplace(tr.stem_out);
        Tensor<Scalar> t = max_pool(tr.stem_out, PoolShape{3, 2, 1}, &tr.pool_idx);
        tr.blocks.assign(blocks_.size(), {});
        tr.stage_mask.assign(kStages, {});
        for (int s = 0; s < kStages; ++s) {
            for (int b = 0; b < cfg_.blocks_per_stage; ++b) {
                const std::size_t i = static_cast<std::size_t>(s * cfg_.blocks_per_stage + b);
                t = block_forward(blocks_[i], t, &tr.blocks[i]);
            }
            if (rng) dropout_inplace(t, cfg_.dropout, *rng, &tr.stage_mask[s]);
        }
        tr.last_h = t.height;
        tr.last_w = t.width;
        tr.fc_in = Tensor<Scalar>(t.channels, 1, 1, t.data.rowwise().mean());
        if (rng) dropout_inplace(tr.fc_in, cfg_.dropout, *rng, &tr.fc_mask);
        else tr.fc_mask.resize(0, 0);
        return fc_.forward(tr.fc_in).data(0, 0);
    }

    /// Accumulates parameter gradients for dL/d(logit).
    void backward(const Trace& tr, Scalar dlogit)
    {
        Tensor<Scalar> dout(1, 1, 1);
        dout.data(0, 0) = dlogit;
        Tensor<Scalar> g = fc_.backward(tr.fc_in, dout);
        if (tr.fc_mask.size() > 0) g.data.array() *= tr.fc_mask.array();
        const int hw = tr.last_h * tr.last_w;
        Tensor<Scalar> gmap(g.channels, tr.last_h, tr.last_w);
        gmap.data = (g.data / static_cast<Scalar>(hw)).replicate(1, hw);
        g = std::move(gmap);
        for (int s = kStages - 1; s >= 0; --s) {
            if (tr.stage_mask[s].size() > 0) g.data.array() *= tr.stage_mask[s].array();
            for (int b = cfg_.blocks_per_stage - 1; b >= 0; --b) {
                const std::size_t i = static_cast<std::size_t>(s * cfg_.blocks_per_stage + b);
                g = block_backward(blocks_[i], tr.blocks[i], g);
            }
        }
        g = max_pool_backward(g, tr.pool_idx, tr.stem_out.height, tr.stem_out.width);
        relu_backward_inplace(tr.stem_out, g);
        stem_.backward(tr.input, g, false);
    }

private:
    struct Block
    {
        Conv2d<Scalar> a, b;
        std::optional<Conv2d<Scalar>> proj;
    };

    static Tensor<Scalar> block_forward(const Block& blk, const Tensor<Scalar>& x, BlockTrace* bt)
    {
        Tensor<Scalar> a = blk.a.forward(x);
        relu_inplace(a);
        Tensor<Scalar> out = blk.b.forward(a);
        if (blk.proj) out.data += blk.proj->forward(x).data;
        else out.data += x.data;
        relu_inplace(out);
        if (bt) {
            bt->in = x;
            bt->a = std::move(a);
            bt->out = out;
        }
        return out;
    }

    static Tensor<Scalar> block_backward(Block& blk, const BlockTrace& bt, Tensor<Scalar> g)
    {
        relu_backward_inplace(bt.out, g);
        Tensor<Scalar> ga = blk.b.backward(bt.a, g);
        relu_backward_inplace(bt.a, ga);
        Tensor<Scalar> dx = blk.a.backward(bt.in, ga);
        if (blk.proj) dx.data += blk.proj->backward(bt.in, g).data;
        else dx.data += g.data;
        return dx;
    }

    ResNetConfig cfg_;
    Conv2d<Scalar> stem_;
    std::vector<Block> blocks_;
    Conv2d<Scalar> fc_;
};

} // namespace celluda::nn
