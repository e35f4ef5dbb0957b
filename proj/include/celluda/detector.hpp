#pragma once

#include <celluda/heatmap.hpp>
#include <celluda/nn/unet.hpp>
#include <celluda/patch.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace celluda {

struct TrainConfig
{
    int epochs = 200;
    double learning_rate = 1e-3;
    int batch_size = 16;
    std::uint64_t seed = 0;
    /// Called after each epoch with (epoch, mean training loss).
    std::function<void(int, double)> on_epoch;
};

struct TrainingMeta
{
    int epochs = 0;
    double learning_rate = 0.0;
    std::string dataset_digest;
    double initial_loss = 0.0;
    std::vector<double> loss_history;
};

/// Heatmap regressor: grayscale patch -> predicted cell-position heatmap.
class DetectorModel
{
public:
    DetectorModel() : DetectorModel(nn::UNetConfig{}, 0) {}
    DetectorModel(const nn::UNetConfig& cfg, std::uint64_t init_seed);

    std::string fingerprint() const { return net_.fingerprint(); }
    const nn::UNetConfig& config() const { return net_.config(); }
    const TrainingMeta& training_meta() const { return meta_; }
    TrainingMeta& training_meta() { return meta_; }
    nn::UNet<float>& network() { return net_; }
    const nn::UNet<float>& network() const { return net_; }

    /// Deterministic; output clamped to [0, 255]. Throws UsageError when the
    /// patch size does not fit the network.
    Heatmap predict(const Patch& patch) const;

    void save(const std::filesystem::path& path) const;
    static DetectorModel load(const std::filesystem::path& path);

private:
    nn::UNet<float> net_;
    TrainingMeta meta_;
};

/// Network input for a patch: one channel, pixels / 255.
template <class Scalar>
nn::Tensor<Scalar> patch_tensor(const Patch& patch)
{
    nn::Tensor<Scalar> t(1, patch.height(), patch.width());
    t.data.row(0) = Eigen::Map<const Eigen::Matrix<double, 1, Eigen::Dynamic>>(patch.pixels.data(), patch.pixels.size())
                        .template cast<Scalar>()
        / Scalar(kHeatmapMax);
    return t;
}

/// Per-pixel mean squared error on the 0..255 scale between the network
/// output (which predicts heatmap / 255) and `target`; writes dL/d(output)
/// scaled by `grad_scale` into `dout` when given.
template <class Scalar>
double heatmap_mse(const nn::Tensor<Scalar>& out, const Heatmap& target, double grad_scale, nn::Tensor<Scalar>* dout)
{
    const Eigen::Index n = out.plane();
    const auto tgt = Eigen::Map<const Eigen::Array<double, 1, Eigen::Dynamic>>(target.values().data(), n);
    const Eigen::Array<double, 1, Eigen::Dynamic> diff
        = out.data.row(0).array().template cast<double>() * kHeatmapMax - tgt;
    const double loss = diff.square().mean();
    if (dout) {
        *dout = nn::Tensor<Scalar>(1, out.height, out.width);
        dout->data.row(0) = (diff * (2.0 * kHeatmapMax * grad_scale / static_cast<double>(n))).template cast<Scalar>();
    }
    return loss;
}

/// Adam on the pixel- and batch-averaged MSE. Warm-starts from `init`.
/// Throws UsageError for an empty or inconsistent sample list and
/// TrainingError when the loss stops being finite.
DetectorModel train_detector(DetectorModel init, std::span<const LabeledSample> samples, const TrainConfig& cfg);

/// Pixel-mean MSE of the model over the samples (no gradient).
double detector_loss(const DetectorModel& model, std::span<const LabeledSample> samples);

std::string dataset_digest(std::span<const LabeledSample> samples);

} // namespace celluda
