#pragma once

#include <celluda/config.hpp>
#include <celluda/data.hpp>
#include <celluda/detector.hpp>
#include <celluda/discriminator.hpp>
#include <celluda/evaluation.hpp>
#include <celluda/patch.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace celluda {

/// Ground truth used only for reporting, never for training.
struct AuditData
{
    /// Truth per target-pool index; entries may be empty when unknown.
    std::vector<std::optional<PointSet>> pool_truth;
    /// Held-out labelled target patches scored for f1_target.
    std::vector<AnnotatedPatch> heldout;
};

struct IterationRecord
{
    int iteration = 0;
    int cap = 0;
    std::size_t pool_size = 0;
    std::size_t n_scored = 0;
    std::size_t n_uncertainty_selected = 0;
    std::size_t n_curriculum_admitted = 0;
    std::size_t cumulative_pseudo = 0;
    std::optional<double> f1_target;
    double f1_source = 0.0;
    std::optional<double> selection_accuracy;
    /// Correctness of the same number of top-ranked labels without the count gate.
    std::optional<double> no_curriculum_accuracy;
    /// Correctness by detected-cell count over every scored pool patch.
    CountHistogram count_accuracy;
    double detector_loss = 0.0;
    double discriminator_accuracy = 0.0;
    double wallclock = 0.0;
};

struct AdaptationReport
{
    AdaptationConfig config;
    std::vector<IterationRecord> iterations;

    /// Deterministic document; wallclock is kept out of it.
    nlohmann::json to_json() const;
    std::string to_csv() const;
    static AdaptationReport from_json(const nlohmann::json& j);
};

nlohmann::json record_to_json(const IterationRecord& r);
IterationRecord record_from_json(const nlohmann::json& j);

/// One admitted pseudo label as persisted in `admitted.csv`.
struct AdmittedLabel
{
    std::size_t pool_index = 0;
    std::string source_id;
    PointSet points;
    double mean_prob = 0.0;
    double entropy = 0.0;
    int iteration = 0;
};

void write_admitted_csv(const std::filesystem::path& path, const std::vector<AdmittedLabel>& labels);
std::vector<AdmittedLabel> read_admitted_csv(const std::filesystem::path& path, int iteration, int height, int width);

struct RunOptions
{
    /// Output directory; empty keeps everything in memory.
    std::filesystem::path run_dir;
    /// Continue from the last completed iteration found in run_dir.
    bool resume = false;
    /// Stop once this iteration is persisted (testing hook for interruption).
    std::optional<int> stop_after;
    std::function<void(const std::string&)> log;
};

/// The iterative loop: train on source, then per iteration predict on the
/// remaining pool, regenerate pseudo labels, keep the most certain CORRECT
/// verdicts, gate them by detected count, admit them permanently and retrain
/// both networks. Every iteration is persisted before the next starts.
AdaptationReport run_adaptation(const std::vector<LabeledSample>& source, const std::vector<Patch>& target_pool,
                                const AdaptationConfig& cfg, const AuditData* audit = nullptr,
                                const RunOptions& options = {});

/// Micro-averaged detection counts of `model` over labelled patches, peaks
/// taken above th_d with window radius floor(sigma).
DetectionCounts evaluate_detector(const DetectorModel& model, const std::vector<AnnotatedPatch>& data,
                                  const AdaptationConfig& cfg);

/// Source-only step: detector and discriminator trained on annotated samples
/// and synthesized negatives.
struct BaselineModels
{
    DetectorModel detector;
    DiscriminatorModel discriminator;
};
BaselineModels train_baseline(const std::vector<LabeledSample>& source, const AdaptationConfig& cfg);

nn::UNetConfig detector_config(const AdaptationConfig& cfg);
nn::ResNetConfig discriminator_config(const AdaptationConfig& cfg);

/// Exclusive advisory lock on `<dir>/.lock`; throws UsageError when another
/// process holds it.
class RunLock
{
public:
    explicit RunLock(const std::filesystem::path& dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    int fd_ = -1;
};

} // namespace celluda
