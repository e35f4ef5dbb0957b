#include <celluda/checkpoint.hpp>
#include <celluda/detector.hpp>
#include <celluda/errors.hpp>
#include <celluda/heatmap_codec.hpp>
#include <celluda/nn/adam.hpp>
#include <celluda/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace celluda {

LabeledSample make_labeled_sample(Patch patch, PointSet points, double sigma, LabelOrigin origin, int iteration_added)
{
    if (points.height() != patch.height() || points.width() != patch.width())
        throw UsageError("LabeledSample: point set shape does not match patch " + patch.source_id);
    Heatmap heatmap = generate_heatmap(points, sigma);
    return {std::move(patch), std::move(points), std::move(heatmap), origin, iteration_added};
}

DetectorModel::DetectorModel(const nn::UNetConfig& cfg, std::uint64_t init_seed) : net_(cfg)
{
    Rng rng(substream_seed(init_seed, "detector-init"));
    net_.initialize(rng);
}

Heatmap DetectorModel::predict(const Patch& patch) const
{
    const int div = 1 << (net_.config().levels - 1);
    if (patch.height() < div || patch.width() < div || patch.height() % div != 0 || patch.width() % div != 0)
        throw UsageError("predict_heatmap: patch " + std::to_string(patch.height()) + "x"
                         + std::to_string(patch.width()) + " does not fit the network");
    const nn::Tensor<float> out = net_.forward(patch_tensor<float>(patch), nullptr);
    Image values(patch.height(), patch.width());
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        const double v = static_cast<double>(out.data(0, i)) * kHeatmapMax;
        values.data()[i] = std::isfinite(v) ? std::clamp(v, 0.0, kHeatmapMax) : 0.0;
    }
    return Heatmap(std::move(values), 0.0);
}

void DetectorModel::save(const std::filesystem::path& path) const
{
    Checkpoint ck;
    ck.kind = "detector";
    ck.fingerprint = fingerprint();
    const auto& c = net_.config();
    ck.meta = {{"in_channels", c.in_channels},
               {"levels", c.levels},
               {"base_width", c.base_width},
               {"epochs", meta_.epochs},
               {"learning_rate", meta_.learning_rate},
               {"dataset_digest", meta_.dataset_digest},
               {"initial_loss", meta_.initial_loss},
               {"loss_history", meta_.loss_history}};
    ck.capture(net_.parameters());
    ck.save(path);
}

DetectorModel DetectorModel::load(const std::filesystem::path& path)
{
    const Checkpoint ck = Checkpoint::load(path);
    if (ck.kind != "detector") throw DataError("checkpoint " + path.string() + " holds a " + ck.kind + ", not a detector");
    nn::UNetConfig cfg;
    try {
        cfg.in_channels = ck.meta.at("in_channels").get<int>();
        cfg.levels = ck.meta.at("levels").get<int>();
        cfg.base_width = ck.meta.at("base_width").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint " + path.string() + ": " + e.what());
    }
    DetectorModel m(cfg, 0);
    if (m.fingerprint() != ck.fingerprint)
        throw DataError("checkpoint " + path.string() + ": architecture fingerprint mismatch (" + ck.fingerprint + ")");
    ck.restore(m.net_.parameters());
    m.meta_.epochs = ck.meta.value("epochs", 0);
    m.meta_.learning_rate = ck.meta.value("learning_rate", 0.0);
    m.meta_.dataset_digest = ck.meta.value("dataset_digest", std::string{});
    m.meta_.initial_loss = ck.meta.value("initial_loss", 0.0);
    m.meta_.loss_history = ck.meta.value("loss_history", std::vector<double>{});
    return m;
}

std::string dataset_digest(std::span<const LabeledSample> samples)
{
    std::uint64_t h = fnv1a("celluda-dataset");
    for (const auto& s : samples) {
        h = splitmix64(h ^ fnv1a(s.patch.source_id));
        for (const auto& p : s.points) {
            h = splitmix64(h ^ static_cast<std::uint64_t>(std::llround(p.row * 1024.0)));
            h = splitmix64(h ^ static_cast<std::uint64_t>(std::llround(p.col * 1024.0)));
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

void check_samples(const DetectorModel& model, std::span<const LabeledSample> samples)
{
    if (samples.empty()) throw UsageError("train_detector: no training samples");
    const int div = 1 << (model.config().levels - 1);
    for (const auto& s : samples) {
        if (s.heatmap.height() != s.patch.height() || s.heatmap.width() != s.patch.width())
            throw UsageError("train_detector: heatmap/patch shape mismatch for " + s.patch.source_id);
        if (s.patch.height() % div != 0 || s.patch.width() % div != 0)
            throw UsageError("train_detector: patch size of " + s.patch.source_id + " does not fit the network");
    }
}

} // namespace

double detector_loss(const DetectorModel& model, std::span<const LabeledSample> samples)
{
    if (samples.empty()) return 0.0;
    double total = 0.0;
    for (const auto& s : samples) {
        const auto out = model.network().forward(patch_tensor<float>(s.patch), nullptr);
        total += heatmap_mse<float>(out, s.heatmap, 0.0, nullptr);
    }
    return total / static_cast<double>(samples.size());
}

DetectorModel train_detector(DetectorModel model, std::span<const LabeledSample> samples, const TrainConfig& cfg)
{
    check_samples(model, samples);
    if (cfg.epochs < 0) throw UsageError("train_detector: epochs must be >= 0");
    if (cfg.batch_size < 1) throw UsageError("train_detector: batch_size must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw UsageError("train_detector: learning rate must be positive");

    auto& net = model.network();
    nn::Adam<float> adam(net.parameters(), cfg.learning_rate);
    Rng rng(substream_seed(cfg.seed, "detector-shuffle"));
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainingMeta& meta = model.training_meta();
    meta.initial_loss = detector_loss(model, samples);
    meta.loss_history.clear();
    nn::UNet<float>::Trace trace;
    nn::Tensor<float> dout;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const double scale = 1.0 / static_cast<double>(stop - start);
            adam.zero_grad();
            for (std::size_t j = start; j < stop; ++j) {
                const LabeledSample& s = samples[order[j]];
                const auto out = net.forward(patch_tensor<float>(s.patch), &trace);
                const double loss = heatmap_mse<float>(out, s.heatmap, scale, &dout);
                if (!std::isfinite(loss)) throw TrainingError("train_detector: loss is not finite", epoch);
                epoch_loss += loss;
                net.backward(trace, dout);
            }
            adam.step();
        }
        epoch_loss /= static_cast<double>(samples.size());
        meta.loss_history.push_back(epoch_loss);
        if (cfg.on_epoch) cfg.on_epoch(epoch, epoch_loss);
    }
    meta.epochs += cfg.epochs;
    meta.learning_rate = cfg.learning_rate;
    meta.dataset_digest = dataset_digest(samples);
    return model;
}

} // namespace celluda
