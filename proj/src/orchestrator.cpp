#include <celluda/curriculum.hpp>
#include <celluda/errors.hpp>
#include <celluda/heatmap_codec.hpp>
#include <celluda/io.hpp>
#include <celluda/orchestrator.hpp>
#include <celluda/random.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

namespace celluda {

namespace fs = std::filesystem;

RunLock::RunLock(const fs::path& dir)
{
    fs::create_directories(dir);
    const auto path = dir / ".lock";
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw DataError("cannot open lockfile " + path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw UsageError("run directory " + dir.string() + " is in use by another process");
    }
}

RunLock::~RunLock()
{
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

nn::UNetConfig detector_config(const AdaptationConfig& cfg)
{
    return nn::UNetConfig{1, cfg.detector_levels, cfg.detector_width};
}

nn::ResNetConfig discriminator_config(const AdaptationConfig& cfg)
{
    return nn::ResNetConfig{2, cfg.discriminator_width, 2, cfg.dropout_rate};
}

namespace {

std::string fmt_real(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::optional<double> optional_from(const nlohmann::json& j, const char* key)
{
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

int peak_window(const AdaptationConfig& cfg) { return std::max(1, static_cast<int>(std::floor(cfg.sigma))); }

void log_line(const RunOptions& o, const std::string& s)
{
    if (o.log) o.log(s);
}

} // namespace

nlohmann::json record_to_json(const IterationRecord& r)
{
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [count, b] : r.count_accuracy)
        hist[std::to_string(count)] = {{"total", b.total}, {"correct", b.correct}};
    return {{"iteration", r.iteration},
            {"cap", r.cap},
            {"pool_size", r.pool_size},
            {"n_scored", r.n_scored},
            {"n_uncertainty_selected", r.n_uncertainty_selected},
            {"n_curriculum_admitted", r.n_curriculum_admitted},
            {"cumulative_pseudo", r.cumulative_pseudo},
            {"f1_target", optional_json(r.f1_target)},
            {"f1_source", r.f1_source},
            {"selection_accuracy", optional_json(r.selection_accuracy)},
            {"no_curriculum_accuracy", optional_json(r.no_curriculum_accuracy)},
            {"count_accuracy", hist},
            {"detector_loss", r.detector_loss},
            {"discriminator_accuracy", r.discriminator_accuracy}};
}

IterationRecord record_from_json(const nlohmann::json& j)
{
    IterationRecord r;
    try {
        r.iteration = j.at("iteration").get<int>();
        r.cap = j.at("cap").get<int>();
        r.pool_size = j.at("pool_size").get<std::size_t>();
        r.n_scored = j.at("n_scored").get<std::size_t>();
        r.n_uncertainty_selected = j.at("n_uncertainty_selected").get<std::size_t>();
        r.n_curriculum_admitted = j.at("n_curriculum_admitted").get<std::size_t>();
        r.cumulative_pseudo = j.at("cumulative_pseudo").get<std::size_t>();
        r.f1_target = optional_from(j, "f1_target");
        r.f1_source = j.at("f1_source").get<double>();
        r.selection_accuracy = optional_from(j, "selection_accuracy");
        r.no_curriculum_accuracy = optional_from(j, "no_curriculum_accuracy");
        for (const auto& [k, v] : j.at("count_accuracy").items())
            r.count_accuracy[std::stoi(k)] = {v.at("total").get<int>(), v.at("correct").get<int>()};
        r.detector_loss = j.at("detector_loss").get<double>();
        r.discriminator_accuracy = j.at("discriminator_accuracy").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("iteration record: ") + e.what());
    }
    return r;
}

nlohmann::json AdaptationReport::to_json() const
{
    nlohmann::json cfg = nlohmann::json::object();
    std::istringstream is(dump_config(config));
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find(" = ");
        cfg[line.substr(0, eq)] = line.substr(eq + 3);
    }
    nlohmann::json its = nlohmann::json::array();
    for (const auto& r : iterations) its.push_back(record_to_json(r));
    return {{"config", cfg}, {"iterations", its}};
}

AdaptationReport AdaptationReport::from_json(const nlohmann::json& j)
{
    AdaptationReport rep;
    try {
        for (const auto& [k, v] : j.at("config").items()) set_config_value(rep.config, k, v.get<std::string>());
        for (const auto& r : j.at("iterations")) rep.iterations.push_back(record_from_json(r));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("report: ") + e.what());
    } catch (const UsageError& e) {
        throw DataError(std::string("report: ") + e.what());
    }
    return rep;
}

std::string AdaptationReport::to_csv() const
{
    std::ostringstream os;
    os << "iteration,cap,pool_size,n_scored,n_uncertainty_selected,n_curriculum_admitted,cumulative_pseudo,"
          "f1_target,f1_source,selection_accuracy,no_curriculum_accuracy,detector_loss,discriminator_accuracy\n";
    auto opt = [](const std::optional<double>& v) { return v ? fmt_real(*v) : std::string(); };
    for (const auto& r : iterations) {
        os << r.iteration << ',' << r.cap << ',' << r.pool_size << ',' << r.n_scored << ',' << r.n_uncertainty_selected
           << ',' << r.n_curriculum_admitted << ',' << r.cumulative_pseudo << ',' << opt(r.f1_target) << ','
           << fmt_real(r.f1_source) << ',' << opt(r.selection_accuracy) << ',' << opt(r.no_curriculum_accuracy) << ','
           << fmt_real(r.detector_loss) << ',' << fmt_real(r.discriminator_accuracy) << '\n';
    }
    return os.str();
}

void write_admitted_csv(const fs::path& path, const std::vector<AdmittedLabel>& labels)
{
    std::ostringstream os;
    os << "pool_index,source_id,n_points,mean_prob,entropy,points\n";
    for (const auto& a : labels) {
        os << a.pool_index << ',' << a.source_id << ',' << a.points.size() << ',' << fmt_real(a.mean_prob) << ','
           << fmt_real(a.entropy) << ',';
        for (std::size_t i = 0; i < a.points.size(); ++i)
            os << (i ? ";" : "") << fmt_real(a.points[i].row) << ' ' << fmt_real(a.points[i].col);
        os << '\n';
    }
    io::write_text_atomic(path, os.str());
}

std::vector<AdmittedLabel> read_admitted_csv(const fs::path& path, int iteration, int height, int width)
{
    std::istringstream is(io::read_text(path));
    std::string line;
    std::getline(is, line);
    if (line != "pool_index,source_id,n_points,mean_prob,entropy,points")
        throw DataError(path.string() + ":1: unexpected header");
    std::vector<AdmittedLabel> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            std::istringstream ls(line);
            std::string f[6];
            for (int i = 0; i < 5; ++i)
                if (!std::getline(ls, f[i], ',')) throw std::invalid_argument("fields");
            std::getline(ls, f[5]);
            AdmittedLabel a;
            a.iteration = iteration;
            a.pool_index = std::stoul(f[0]);
            a.source_id = f[1];
            const auto n = std::stoul(f[2]);
            a.mean_prob = std::stod(f[3]);
            a.entropy = std::stod(f[4]);
            a.points = PointSet(height, width);
            std::istringstream ps(f[5]);
            std::string pt;
            while (std::getline(ps, pt, ';')) {
                std::istringstream xy(pt);
                double r = 0, c = 0;
                if (!(xy >> r >> c)) throw std::invalid_argument("point");
                a.points.add({r, c});
            }
            if (a.points.size() != n) throw std::invalid_argument("count");
            out.push_back(std::move(a));
        } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed admitted row");
        }
    }
    return out;
}

DetectionCounts evaluate_detector(const DetectorModel& model, const std::vector<AnnotatedPatch>& data,
                                  const AdaptationConfig& cfg)
{
    DetectionCounts c;
    for (const auto& d : data) {
        const PointSet found = detect_peaks(model.predict(d.patch), cfg.th_d, peak_window(cfg));
        c += counts_of(match_points(found, d.points, cfg.match_threshold));
    }
    return c;
}

namespace {

std::vector<HeatmapPair> negatives_for(const std::vector<HeatmapPair>& positives, const std::vector<const PointSet*>& points,
                                       const AdaptationConfig& cfg, int iteration)
{
    std::vector<HeatmapPair> out;
    out.reserve(positives.size());
    const std::uint64_t base = substream_seed(cfg.seed, "negatives", static_cast<std::uint64_t>(iteration));
    for (std::size_t i = 0; i < positives.size(); ++i) {
        const auto neg = synthesize_negative(*points[i], cfg.sigma, substream_seed(base, "sample", i), cfg.neg_min_dist);
        out.push_back({positives[i].patch, neg.heatmap});
    }
    return out;
}

TrainConfig train_config(const AdaptationConfig& cfg, int epochs, const char* stream, int iteration)
{
    TrainConfig t;
    t.epochs = epochs;
    t.learning_rate = cfg.lr;
    t.batch_size = cfg.batch_size;
    t.seed = substream_seed(cfg.seed, stream, static_cast<std::uint64_t>(iteration));
    return t;
}

struct Scored
{
    PseudoCandidate candidate;
    bool audited = false;
    bool correct = false;
};

template <class F>
void parallel_for(std::size_t n, int workers, F&& body)
{
    const int nthreads = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    if (nthreads == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    for (int t = 0; t < nthreads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

class Loop
{
public:
    Loop(const std::vector<LabeledSample>& source, const std::vector<Patch>& pool, const AdaptationConfig& cfg,
         const AuditData* audit, const RunOptions& opt)
        : source_(source), pool_(pool), cfg_(cfg), audit_(audit), opt_(opt),
          detector_(detector_config(cfg), substream_seed(cfg.seed, "detector-weights")),
          discriminator_(discriminator_config(cfg), substream_seed(cfg.seed, "discriminator-weights")),
          admitted_flag_(pool.size(), false)
    {
        for (const auto& s : source_) source_eval_.push_back({s.patch, s.points, 0, 0});
    }

    AdaptationReport run()
    {
        report_.config = cfg_;
        int start = 0;
        if (opt_.resume) start = restore() + 1;
        for (int k = start; k <= cfg_.iterations; ++k) {
            const auto t0 = std::chrono::steady_clock::now();
            IterationRecord rec = k == 0 ? baseline() : iterate(k);
            rec.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            report_.iterations.push_back(rec);
            persist(k, rec);
            log_line(opt_, "iteration " + std::to_string(k) + ": admitted " + std::to_string(rec.n_curriculum_admitted)
                               + ", cumulative " + std::to_string(rec.cumulative_pseudo) + ", f1_target "
                               + (rec.f1_target ? fmt_real(*rec.f1_target) : std::string("n/a")));
            if (opt_.stop_after && k >= *opt_.stop_after) break;
        }
        return report_;
    }

    BaselineModels release() { return {std::move(detector_), std::move(discriminator_)}; }

private:
    bool persistent() const { return !opt_.run_dir.empty(); }
    fs::path iter_dir(int k) const { return opt_.run_dir / ("iter_" + std::to_string(k)); }

    std::vector<LabeledSample> training_set() const
    {
        std::vector<LabeledSample> all = source_;
        for (const auto& a : admitted_)
            all.push_back(make_labeled_sample(pool_[a.pool_index], a.points, cfg_.sigma, LabelOrigin::pseudo, a.iteration));
        return all;
    }

    void train_models(int k)
    {
        const auto samples = training_set();
        if (!cfg_.warm_start && k > 0) {
            detector_ = DetectorModel(detector_config(cfg_), substream_seed(cfg_.seed, "detector-weights"));
            discriminator_ = DiscriminatorModel(discriminator_config(cfg_), substream_seed(cfg_.seed, "discriminator-weights"));
        }
        auto dcfg = train_config(cfg_, cfg_.epochs, "detector-train", k);
        dcfg.on_epoch = [&](int e, double loss) {
            if (e % 10 == 0 || e == cfg_.epochs)
                log_line(opt_, "  detector epoch " + std::to_string(e) + " loss " + fmt_real(loss));
        };
        detector_ = train_detector(std::move(detector_), samples, dcfg);

        std::vector<HeatmapPair> positives;
        std::vector<const PointSet*> points;
        for (const auto& s : samples) {
            positives.push_back({&s.patch, s.heatmap});
            points.push_back(&s.points);
        }
        const auto negatives = negatives_for(positives, points, cfg_, k);
        auto ccfg = train_config(cfg_, cfg_.disc_epochs, "discriminator-train", k);
        ccfg.on_epoch = [&](int e, double loss) {
            if (e % 10 == 0 || e == cfg_.disc_epochs)
                log_line(opt_, "  discriminator epoch " + std::to_string(e) + " loss " + fmt_real(loss));
        };
        discriminator_ = train_discriminator(std::move(discriminator_), positives, negatives, ccfg);
        disc_accuracy_ = discriminator_accuracy(discriminator_, positives, negatives);
        detector_loss_ = detector_loss(detector_, samples);
    }

    void evaluate(IterationRecord& rec) const
    {
        rec.f1_source = f1_score(evaluate_detector(detector_, source_eval_, cfg_)).f1;
        if (audit_ && !audit_->heldout.empty()) rec.f1_target = f1_score(evaluate_detector(detector_, audit_->heldout, cfg_)).f1;
        rec.detector_loss = detector_loss_;
        rec.discriminator_accuracy = disc_accuracy_;
        rec.cumulative_pseudo = admitted_.size();
    }

    IterationRecord baseline()
    {
        IterationRecord rec;
        rec.iteration = 0;
        rec.cap = 0;
        rec.pool_size = pool_.size();
        train_models(0);
        evaluate(rec);
        return rec;
    }

    const PointSet* truth_of(std::size_t pool_index) const
    {
        if (!audit_ || pool_index >= audit_->pool_truth.size() || !audit_->pool_truth[pool_index]) return nullptr;
        return &*audit_->pool_truth[pool_index];
    }

    IterationRecord iterate(int k)
    {
        IterationRecord rec;
        rec.iteration = k;
        rec.cap = cap_for_iteration(k, cfg_.N_c);

        std::vector<std::size_t> remaining;
        for (std::size_t i = 0; i < pool_.size(); ++i)
            if (!admitted_flag_[i]) remaining.push_back(i);
        rec.pool_size = remaining.size();

        // Steps 2-4: predict, regenerate and score every remaining patch.
        std::vector<Scored> scored(remaining.size());
        const std::uint64_t mc_root = substream_seed(cfg_.seed, "mc", static_cast<std::uint64_t>(k));
        parallel_for(remaining.size(), cfg_.workers, [&](std::size_t j) {
            const std::size_t idx = remaining[j];
            const Patch& patch = pool_[idx];
            PseudoLabel label = regenerate_pseudo_heatmap(detector_.predict(patch), cfg_.th_d, cfg_.sigma);
            Scored& s = scored[j];
            s.candidate.patch = &patch;
            s.candidate.pool_index = idx;
            s.candidate.score = mc_predict(discriminator_, patch, label.heatmap, cfg_.T, substream_seed(mc_root, "patch", idx));
            s.candidate.predicted_label = verdict_of(*s.candidate.score);
            s.candidate.pseudo_heatmap = std::move(label.heatmap);
            s.candidate.detected_points = std::move(label.points);
            if (const PointSet* t = truth_of(idx)) {
                s.audited = true;
                s.correct = pseudo_label_correct(s.candidate.detected_points, *t, cfg_.match_threshold);
            }
        });
        rec.n_scored = scored.size();

        std::vector<PseudoCandidate> candidates;
        candidates.reserve(scored.size());
        for (const auto& s : scored) candidates.push_back(s.candidate);
        const auto ranked = rank_confident(candidates);
        const auto selected = select_confident(candidates, cfg_.th_u);
        rec.n_uncertainty_selected = selected.size();

        // Step 5: curriculum gate.
        const auto admitted = cfg_.use_curriculum ? filter_by_count(selected, rec.cap) : selected;
        rec.n_curriculum_admitted = admitted.size();

        audit(rec, scored, ranked, admitted);
        if (persistent()) write_scores(k, scored);

        std::vector<AdmittedLabel> fresh;
        for (const auto& c : admitted) {
            admitted_flag_[c.pool_index] = true;
            fresh.push_back({c.pool_index, c.source_id(), c.detected_points, c.score->mean_prob, c.score->entropy, k});
        }
        admitted_.insert(admitted_.end(), fresh.begin(), fresh.end());
        fresh_ = std::move(fresh);

        train_models(k);
        evaluate(rec);
        return rec;
    }

    void audit(IterationRecord& rec, const std::vector<Scored>& scored, const std::vector<PseudoCandidate>& ranked,
               const std::vector<PseudoCandidate>& admitted) const
    {
        if (!audit_ || audit_->pool_truth.empty()) return;
        std::vector<AuditedLabel> labels;
        for (const auto& s : scored)
            if (s.audited) labels.push_back({&s.candidate.detected_points, truth_of(s.candidate.pool_index)});
        rec.count_accuracy = accuracy_by_cell_count(labels, cfg_.match_threshold);

        auto rate = [&](auto first, auto last) -> std::optional<double> {
            std::size_t n = 0, ok = 0;
            for (auto it = first; it != last; ++it) {
                const PointSet* t = truth_of(it->pool_index);
                if (!t) continue;
                ++n;
                ok += pseudo_label_correct(it->detected_points, *t, cfg_.match_threshold);
            }
            if (n == 0) return std::nullopt;
            return static_cast<double>(ok) / static_cast<double>(n);
        };
        rec.selection_accuracy = rate(admitted.begin(), admitted.end());
        const auto n = std::min(admitted.size(), ranked.size());
        rec.no_curriculum_accuracy = rate(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n));
    }

    void write_scores(int k, const std::vector<Scored>& scored) const
    {
        fs::create_directories(iter_dir(k));
        std::ostringstream os;
        os << "source_id,mean_prob,entropy,predicted_label,n_points,pool_index,audited,correct\n";
        for (const auto& s : scored) {
            const auto& c = s.candidate;
            os << c.source_id() << ',' << fmt_real(c.score->mean_prob) << ',' << fmt_real(c.score->entropy) << ','
               << to_string(*c.predicted_label) << ',' << c.detected_points.size() << ',' << c.pool_index << ','
               << (s.audited ? "true" : "false") << ',' << (s.audited ? (s.correct ? "true" : "false") : "")
               << '\n';
        }
        io::write_text_atomic(iter_dir(k) / "scores.csv", os.str());
    }

    void persist(int k, const IterationRecord& rec)
    {
        if (!persistent()) return;
        const auto dir = iter_dir(k);
        fs::create_directories(dir);
        detector_.save(dir / "detector.ckpt");
        discriminator_.save(dir / "discriminator.ckpt");
        write_admitted_csv(dir / "admitted.csv", k == 0 ? std::vector<AdmittedLabel>{} : fresh_);
        nlohmann::json timing = nlohmann::json::object();
        const auto timing_path = opt_.run_dir / "timing.json";
        if (fs::exists(timing_path)) timing = nlohmann::json::parse(io::read_text(timing_path), nullptr, false);
        if (!timing.is_object()) timing = nlohmann::json::object();
        timing[std::to_string(k)] = rec.wallclock;
        io::write_text_atomic(timing_path, timing.dump(2) + "\n");
        io::write_text_atomic(opt_.run_dir / "report.json", report_.to_json().dump(2) + "\n");
        io::write_text_atomic(opt_.run_dir / "report.csv", report_.to_csv());
        // Written last: its presence marks the iteration as complete.
        io::write_text_atomic(dir / "report.json", record_to_json(rec).dump(2) + "\n");
    }

    int restore()
    {
        int last = -1;
        while (fs::exists(iter_dir(last + 1) / "report.json")) ++last;
        if (last < 0) return -1;
        log_line(opt_, "resuming after iteration " + std::to_string(last));
        const int h = pool_.empty() ? cfg_.patch : pool_.front().height();
        const int w = pool_.empty() ? cfg_.patch : pool_.front().width();
        for (int k = 0; k <= last; ++k) {
            report_.iterations.push_back(record_from_json(nlohmann::json::parse(io::read_text(iter_dir(k) / "report.json"))));
            if (k == 0) continue;
            for (auto& a : read_admitted_csv(iter_dir(k) / "admitted.csv", k, h, w)) {
                if (a.pool_index >= pool_.size() || pool_[a.pool_index].source_id != a.source_id)
                    throw DataError("resume: admitted label " + a.source_id + " does not match the target pool");
                admitted_flag_[a.pool_index] = true;
                admitted_.push_back(std::move(a));
            }
        }
        detector_ = DetectorModel::load(iter_dir(last) / "detector.ckpt");
        discriminator_ = DiscriminatorModel::load(iter_dir(last) / "discriminator.ckpt");
        return last;
    }

    const std::vector<LabeledSample>& source_;
    const std::vector<Patch>& pool_;
    AdaptationConfig cfg_;
    const AuditData* audit_;
    RunOptions opt_;
    DetectorModel detector_;
    DiscriminatorModel discriminator_;
    std::vector<bool> admitted_flag_;
    std::vector<AdmittedLabel> admitted_;
    std::vector<AdmittedLabel> fresh_;
    std::vector<AnnotatedPatch> source_eval_;
    AdaptationReport report_;
    double disc_accuracy_ = 0.0;
    double detector_loss_ = 0.0;
};

} // namespace

BaselineModels train_baseline(const std::vector<LabeledSample>& source, const AdaptationConfig& cfg)
{
    AdaptationConfig c = cfg;
    c.iterations = 0;
    const std::vector<Patch> no_pool;
    RunOptions opt;
    Loop loop(source, no_pool, c, nullptr, opt);
    loop.run();
    return loop.release();
}

AdaptationReport run_adaptation(const std::vector<LabeledSample>& source, const std::vector<Patch>& target_pool,
                                const AdaptationConfig& cfg, const AuditData* audit, const RunOptions& options)
{
    cfg.validate();
    if (source.empty()) throw UsageError("run_adaptation: source set is empty");
    if (target_pool.empty()) throw UsageError("run_adaptation: target pool is empty");
    std::optional<RunLock> lock;
    if (!options.run_dir.empty()) {
        fs::create_directories(options.run_dir);
        lock.emplace(options.run_dir);
        if (!options.resume && fs::exists(options.run_dir / "iter_0" / "report.json"))
            throw UsageError("run directory " + options.run_dir.string() + " already holds a run; use resume");
    }
    Loop loop(source, target_pool, cfg, audit, options);
    return loop.run();
}

} // namespace celluda
