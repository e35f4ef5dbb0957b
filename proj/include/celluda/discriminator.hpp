#pragma once

#include <celluda/detector.hpp>
#include <celluda/heatmap.hpp>
#include <celluda/nn/resnet.hpp>
#include <celluda/patch.hpp>
#include <celluda/point_set.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace celluda {

inline constexpr double kDefaultDropoutRate = 0.3;
inline constexpr int kDefaultMcSamples = 10;

/// Binary classifier scoring whether a heatmap is a correct cell-position
/// label for its patch. Patch and heatmap enter as two channels on the
/// 0..255 scale (divided by 255 internally).
class DiscriminatorModel
{
public:
    DiscriminatorModel() : DiscriminatorModel(nn::ResNetConfig{}, 0) {}
    DiscriminatorModel(const nn::ResNetConfig& cfg, std::uint64_t init_seed);

    std::string fingerprint() const { return net_.fingerprint(); }
    double dropout_rate() const { return net_.config().dropout; }
    void set_dropout_rate(double rate);
    const nn::ResNetConfig& config() const { return net_.config(); }
    nn::ResNet<float>& network() { return net_; }
    const nn::ResNet<float>& network() const { return net_; }
    const TrainingMeta& training_meta() const { return meta_; }
    TrainingMeta& training_meta() { return meta_; }

    /// Positive-class probability; dropout is sampled when `rng` is given.
    double probability(const Patch& patch, const Heatmap& heatmap, Rng* rng) const;

    void save(const std::filesystem::path& path) const;
    static DiscriminatorModel load(const std::filesystem::path& path);

private:
    nn::ResNet<float> net_;
    TrainingMeta meta_;
};

template <class Scalar>
nn::Tensor<Scalar> pair_tensor(const Patch& patch, const Heatmap& heatmap)
{
    if (heatmap.height() != patch.height() || heatmap.width() != patch.width())
        throw UsageError("discriminator: heatmap/patch shape mismatch for " + patch.source_id);
    nn::Tensor<Scalar> t(2, patch.height(), patch.width());
    using Row = Eigen::Matrix<double, 1, Eigen::Dynamic>;
    t.data.row(0) = Eigen::Map<const Row>(patch.pixels.data(), patch.pixels.size()).template cast<Scalar>()
        / Scalar(kHeatmapMax);
    t.data.row(1) = Eigen::Map<const Row>(heatmap.values().data(), heatmap.values().size()).template cast<Scalar>()
        / Scalar(kHeatmapMax);
    return t;
}

/// A (patch, heatmap) pair; the patch is borrowed.
struct HeatmapPair
{
    const Patch* patch = nullptr;
    Heatmap heatmap;
};

/// Cross-entropy training with dropout active. Throws UsageError when a class
/// is empty or when a negative equals a positive for the same patch.
DiscriminatorModel train_discriminator(DiscriminatorModel init, std::span<const HeatmapPair> positives,
                                       std::span<const HeatmapPair> negatives, const TrainConfig& cfg);

/// Fraction of pairs classified as their label with dropout disabled.
double discriminator_accuracy(const DiscriminatorModel& model, std::span<const HeatmapPair> positives,
                              std::span<const HeatmapPair> negatives);

struct UncertaintyScore
{
    double mean_prob = 0.0;
    /// Binary entropy of mean_prob in nats, within [0, ln 2].
    double entropy = 0.0;
    int n_samples = 0;
    std::vector<double> pass_probs;
};

/// -p ln p - (1-p) ln(1-p) with 0 ln 0 = 0.
double binary_entropy(double p);

/// Entropy of the expectation over per-pass probabilities.
UncertaintyScore score_from_probabilities(std::span<const double> probs);

/// T stochastic passes with independent dropout masks, seeded.
UncertaintyScore mc_predict(const DiscriminatorModel& model, const Patch& patch, const Heatmap& heatmap, int passes,
                            std::uint64_t seed);

enum class Verdict
{
    correct,
    incorrect
};

inline Verdict verdict_of(const UncertaintyScore& s) { return s.mean_prob >= 0.5 ? Verdict::correct : Verdict::incorrect; }
const char* to_string(Verdict v);

/// Target patch with its regenerated pseudo label and, once scored, the
/// discriminator's verdict.
struct PseudoCandidate
{
    const Patch* patch = nullptr;
    std::size_t pool_index = 0;
    Heatmap pseudo_heatmap;
    PointSet detected_points;
    std::optional<UncertaintyScore> score;
    std::optional<Verdict> predicted_label;
    std::optional<int> admitted_iteration;

    const std::string& source_id() const { return patch->source_id; }
};

/// Candidates judged CORRECT, ordered by ascending entropy (ties by
/// source_id), truncated to ceil(fraction * |candidates|). Throws UsageError
/// when any candidate is unscored or fraction is outside (0, 1].
std::vector<PseudoCandidate> select_confident(const std::vector<PseudoCandidate>& candidates, double fraction);

/// The ordering select_confident draws from, without the quota.
std::vector<PseudoCandidate> rank_confident(const std::vector<PseudoCandidate>& candidates);

/// Curriculum gate on detected-cell count: keeps 1 <= count <= cap.
std::vector<PseudoCandidate> filter_by_count(const std::vector<PseudoCandidate>& selected, int cap);

} // namespace celluda
