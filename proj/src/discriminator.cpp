#include <celluda/checkpoint.hpp>
#include <celluda/curriculum.hpp>
#include <celluda/discriminator.hpp>
#include <celluda/errors.hpp>
#include <celluda/nn/adam.hpp>
#include <celluda/random.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace celluda {

namespace {

double sigmoid(double z)
{
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

} // namespace

DiscriminatorModel::DiscriminatorModel(const nn::ResNetConfig& cfg, std::uint64_t init_seed) : net_(cfg)
{
    Rng rng(substream_seed(init_seed, "discriminator-init"));
    net_.initialize(rng);
}

void DiscriminatorModel::set_dropout_rate(double rate)
{
    if (!(rate >= 0.0 && rate < 1.0)) throw UsageError("discriminator: dropout rate must be in [0, 1)");
    net_.set_dropout(rate);
}

double DiscriminatorModel::probability(const Patch& patch, const Heatmap& heatmap, Rng* rng) const
{
    return sigmoid(static_cast<double>(net_.forward(pair_tensor<float>(patch, heatmap), rng, nullptr)));
}

void DiscriminatorModel::save(const std::filesystem::path& path) const
{
    Checkpoint ck;
    ck.kind = "discriminator";
    ck.fingerprint = fingerprint();
    const auto& c = net_.config();
    ck.meta = {{"in_channels", c.in_channels},
               {"base_width", c.base_width},
               {"blocks_per_stage", c.blocks_per_stage},
               {"dropout", c.dropout},
               {"epochs", meta_.epochs},
               {"learning_rate", meta_.learning_rate},
               {"dataset_digest", meta_.dataset_digest},
               {"initial_loss", meta_.initial_loss},
               {"loss_history", meta_.loss_history}};
    ck.capture(net_.parameters());
    ck.save(path);
}

DiscriminatorModel DiscriminatorModel::load(const std::filesystem::path& path)
{
    const Checkpoint ck = Checkpoint::load(path);
    if (ck.kind != "discriminator")
        throw DataError("checkpoint " + path.string() + " holds a " + ck.kind + ", not a discriminator");
    nn::ResNetConfig cfg;
    try {
        cfg.in_channels = ck.meta.at("in_channels").get<int>();
        cfg.base_width = ck.meta.at("base_width").get<int>();
        cfg.blocks_per_stage = ck.meta.at("blocks_per_stage").get<int>();
        cfg.dropout = ck.meta.at("dropout").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint " + path.string() + ": " + e.what());
    }
    DiscriminatorModel m(cfg, 0);
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

namespace {

struct Example
{
    const HeatmapPair* pair;
    double label;
};

void check_pairs(std::span<const HeatmapPair> positives, std::span<const HeatmapPair> negatives)
{
    if (positives.empty() || negatives.empty())
        throw UsageError("train_discriminator: both positive and negative examples are required");
    std::multimap<std::string, const HeatmapPair*> by_patch;
    for (const auto& p : positives) {
        if (p.patch == nullptr) throw UsageError("train_discriminator: positive without a patch");
        by_patch.emplace(p.patch->source_id, &p);
    }
    for (const auto& n : negatives) {
        if (n.patch == nullptr) throw UsageError("train_discriminator: negative without a patch");
        const auto [lo, hi] = by_patch.equal_range(n.patch->source_id);
        for (auto it = lo; it != hi; ++it) {
            if (it->second->heatmap == n.heatmap)
                throw UsageError("train_discriminator: negative for " + n.patch->source_id
                                 + " is identical to a positive label");
        }
    }
}

double pair_loss(const DiscriminatorModel& m, const Example& e)
{
    const double z = static_cast<double>(m.network().forward(pair_tensor<float>(*e.pair->patch, e.pair->heatmap), nullptr, nullptr));
    return softplus(z) - e.label * z;
}

} // namespace

DiscriminatorModel train_discriminator(DiscriminatorModel model, std::span<const HeatmapPair> positives,
                                       std::span<const HeatmapPair> negatives, const TrainConfig& cfg)
{
    check_pairs(positives, negatives);
    if (cfg.epochs < 0) throw UsageError("train_discriminator: epochs must be >= 0");
    if (cfg.batch_size < 1) throw UsageError("train_discriminator: batch_size must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw UsageError("train_discriminator: learning rate must be positive");

    std::vector<Example> examples;
    for (const auto& p : positives) examples.push_back({&p, 1.0});
    for (const auto& n : negatives) examples.push_back({&n, 0.0});

    auto& net = model.network();
    nn::Adam<float> adam(net.parameters(), cfg.learning_rate);
    Rng shuffle_rng(substream_seed(cfg.seed, "discriminator-shuffle"));
    Rng dropout_rng(substream_seed(cfg.seed, "discriminator-dropout"));

    TrainingMeta& meta = model.training_meta();
    meta.initial_loss = 0.0;
    for (const auto& e : examples) meta.initial_loss += pair_loss(model, e);
    meta.initial_loss /= static_cast<double>(examples.size());
    meta.loss_history.clear();

    nn::ResNet<float>::Trace trace;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = examples.size(); i > 1; --i)
            std::swap(examples[i - 1], examples[uniform_index(shuffle_rng, i)]);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < examples.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(examples.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const double scale = 1.0 / static_cast<double>(stop - start);
            adam.zero_grad();
            for (std::size_t j = start; j < stop; ++j) {
                const Example& e = examples[j];
                const double z = static_cast<double>(
                    net.forward(pair_tensor<float>(*e.pair->patch, e.pair->heatmap), &dropout_rng, &trace));
                const double loss = softplus(z) - e.label * z;
                if (!std::isfinite(loss)) throw TrainingError("train_discriminator: loss is not finite", epoch);
                epoch_loss += loss;
                net.backward(trace, static_cast<float>((sigmoid(z) - e.label) * scale));
            }
            adam.step();
        }
        epoch_loss /= static_cast<double>(examples.size());
        meta.loss_history.push_back(epoch_loss);
        if (cfg.on_epoch) cfg.on_epoch(epoch, epoch_loss);
    }
    meta.epochs += cfg.epochs;
    meta.learning_rate = cfg.learning_rate;
    return model;
}

double discriminator_accuracy(const DiscriminatorModel& model, std::span<const HeatmapPair> positives,
                              std::span<const HeatmapPair> negatives)
{
    const std::size_t n = positives.size() + negatives.size();
    if (n == 0) return 0.0;
    std::size_t hits = 0;
    for (const auto& p : positives) hits += model.probability(*p.patch, p.heatmap, nullptr) >= 0.5;
    for (const auto& q : negatives) hits += model.probability(*q.patch, q.heatmap, nullptr) < 0.5;
    return static_cast<double>(hits) / static_cast<double>(n);
}

double binary_entropy(double p)
{
    auto term = [](double q) { return q > 0.0 ? -q * std::log(q) : 0.0; };
    return term(p) + term(1.0 - p);
}

UncertaintyScore score_from_probabilities(std::span<const double> probs)
{
    if (probs.empty()) throw UsageError("score_from_probabilities: no passes");
    UncertaintyScore s;
    s.pass_probs.assign(probs.begin(), probs.end());
    s.n_samples = static_cast<int>(probs.size());
    s.mean_prob = std::clamp(std::accumulate(probs.begin(), probs.end(), 0.0) / static_cast<double>(probs.size()), 0.0, 1.0);
    s.entropy = binary_entropy(s.mean_prob);
    return s;
}

UncertaintyScore mc_predict(const DiscriminatorModel& model, const Patch& patch, const Heatmap& heatmap, int passes,
                            std::uint64_t seed)
{
    if (passes < 1) throw UsageError("mc_predict: T must be >= 1");
    const auto& net = model.network();
    const nn::Tensor<float> features = net.features(pair_tensor<float>(patch, heatmap));
    Rng rng(substream_seed(seed, "mc-dropout"));
    std::vector<double> probs;
    probs.reserve(static_cast<std::size_t>(passes));
    for (int t = 0; t < passes; ++t)
        probs.push_back(sigmoid(static_cast<double>(net.logit_from_features(features, &rng))));
    return score_from_probabilities(probs);
}

const char* to_string(Verdict v) { return v == Verdict::correct ? "CORRECT" : "INCORRECT"; }

std::vector<PseudoCandidate> rank_confident(const std::vector<PseudoCandidate>& candidates)
{
    std::vector<const PseudoCandidate*> positives;
    for (const auto& c : candidates) {
        if (!c.score) throw UsageError("select_confident: candidate " + c.source_id() + " has no score");
        if (verdict_of(*c.score) == Verdict::correct) positives.push_back(&c);
    }
    std::sort(positives.begin(), positives.end(), [](const PseudoCandidate* a, const PseudoCandidate* b) {
        if (a->score->entropy != b->score->entropy) return a->score->entropy < b->score->entropy;
        return a->source_id() < b->source_id();
    });
    std::vector<PseudoCandidate> ranked;
    ranked.reserve(positives.size());
    for (const auto* c : positives) {
        ranked.push_back(*c);
        ranked.back().predicted_label = Verdict::correct;
    }
    return ranked;
}

std::vector<PseudoCandidate> select_confident(const std::vector<PseudoCandidate>& candidates, double fraction)
{
    if (!(fraction > 0.0 && fraction <= 1.0)) throw UsageError("select_confident: th_u must be in (0, 1]");
    auto ranked = rank_confident(candidates);
    const auto quota = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(candidates.size()) - 1e-9));
    if (ranked.size() > quota) ranked.resize(quota);
    return ranked;
}

std::vector<PseudoCandidate> filter_by_count(const std::vector<PseudoCandidate>& selected, int cap)
{
    return filter_by_count(selected, cap, [](const PseudoCandidate& c) { return c.detected_points.size(); });
}

} // namespace celluda
