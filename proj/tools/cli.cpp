#include "cli.hpp"

#include <celluda/config.hpp>
#include <celluda/data.hpp>
#include <celluda/errors.hpp>
#include <celluda/heatmap_codec.hpp>
#include <celluda/io.hpp>
#include <celluda/orchestrator.hpp>
#include <celluda/render.hpp>
#include <celluda/synthetic.hpp>

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

namespace celluda::cli {

namespace fs = std::filesystem;

namespace {

struct Context
{
    std::ostream& out;
    std::ostream& err;
    bool quiet = false;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    void log(const std::string& s) const
    {
        if (quiet) return;
        char stamp[32];
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::snprintf(stamp, sizeof stamp, "[%7.1fs] ", dt);
        err << stamp << s << '\n' << std::flush;
    }
};

std::string config_help()
{
    std::ostringstream os;
    os << "Config keys (flat 'key = value' file; override with --set key=value):\n";
    for (const auto& e : config_schema()) {
        char line[160];
        std::snprintf(line, sizeof line, "  %-20s %-8s %s\n", e.key.c_str(), e.default_value.c_str(), e.help.c_str());
        os << line;
    }
    os << "Exit codes: 0 success, 2 usage, 3 data error, 4 training divergence.";
    return os.str();
}

struct ConfigArgs
{
    std::string file;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
};

void add_config_options(CLI::App* cmd, ConfigArgs& a)
{
    cmd->add_option("--config", a.file, "configuration file");
    cmd->add_option("--set", a.sets, "override one config key, KEY=VALUE (repeatable)");
    cmd->add_option("--seed", a.seed, "root random seed (overrides the config)");
}

AdaptationConfig resolve_config(const ConfigArgs& a, const fs::path& fallback = {})
{
    AdaptationConfig cfg;
    if (!a.file.empty()) cfg = load_config(a.file);
    else if (!fallback.empty() && fs::exists(fallback)) cfg = load_config(fallback);
    for (const auto& kv : a.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects KEY=VALUE, got '" + kv + "'");
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (a.seed) cfg.seed = *a.seed;
    cfg.validate();
    return cfg;
}

void check_patch_size(const std::vector<AnnotatedPatch>& patches, const AdaptationConfig& cfg, const std::string& what)
{
    for (const auto& p : patches)
        if (p.patch.height() != cfg.patch || p.patch.width() != cfg.patch)
            throw UsageError(what + ": patch " + p.patch.source_id + " is " + std::to_string(p.patch.height()) + "x"
                             + std::to_string(p.patch.width()) + ", config expects patch = " + std::to_string(cfg.patch));
}

// Annotated frames are tiled and sampled down to n_labeled; prepared datasets are used whole.
std::vector<LabeledSample> load_source(const fs::path& dir, const AdaptationConfig& cfg, const Context& ctx)
{
    auto ds = load_dataset(dir, Domain::source);
    if (!ds.has_truth) throw DataError("source dataset " + dir.string() + " lacks ground truth");
    check_patch_size(ds.patches, cfg, "source");
    std::vector<LabeledSample> out;
    if (ds.manifest.value("format", "") == "annotations") {
        for (auto i : sample_labeled(ds.patches, static_cast<std::size_t>(cfg.n_labeled), cfg.seed))
            out.push_back(make_labeled_sample(ds.patches[i].patch, ds.patches[i].points, cfg.sigma));
    } else {
        for (auto& p : ds.patches) out.push_back(make_labeled_sample(p.patch, p.points, cfg.sigma));
    }
    ctx.log("source: " + std::to_string(out.size()) + " labeled patches from " + dir.string());
    return out;
}

std::vector<Patch> load_pool(const fs::path& dir, const AdaptationConfig& cfg, const Context& ctx)
{
    auto ds = load_dataset(dir, Domain::target);
    check_patch_size(ds.patches, cfg, "target");
    std::vector<Patch> pool;
    for (auto& p : ds.patches) pool.push_back(std::move(p.patch));
    ctx.log("target: " + std::to_string(pool.size()) + " unlabeled patches from " + dir.string());
    return pool;
}

// Patches whose id is in the pool audit the pool; the rest form the held-out set.
AuditData load_audit(const std::vector<std::string>& dirs, const std::vector<Patch>& pool, const Context& ctx)
{
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < pool.size(); ++i) index[pool[i].source_id] = i;
    AuditData audit;
    audit.pool_truth.resize(pool.size());
    std::size_t matched = 0;
    for (const auto& dir : dirs) {
        auto ds = load_dataset(dir, Domain::target);
        if (!ds.has_truth) throw DataError("audit dataset " + dir + " lacks ground truth");
        for (auto& p : ds.patches) {
            if (auto it = index.find(p.patch.source_id); it != index.end()) {
                audit.pool_truth[it->second] = p.points;
                ++matched;
            } else {
                audit.heldout.push_back(std::move(p));
            }
        }
    }
    ctx.log("audit: " + std::to_string(matched) + " pool patches, " + std::to_string(audit.heldout.size())
            + " held-out patches");
    return audit;
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// Writes `<base>.csv` and `<base>.png`.
void write_histogram(const std::string& base, const CountHistogram& hist, const std::string& title)
{
    std::ostringstream csv;
    csv << "detected_count,total,correct,rate\n";
    std::vector<std::string> labels, notes;
    std::vector<double> values;
    for (const auto& [count, b] : hist) {
        csv << count << ',' << b.total << ',' << b.correct << ',' << fmt(b.rate()) << '\n';
        labels.push_back(std::to_string(count));
        values.push_back(b.rate());
        notes.push_back(std::to_string(b.correct) + "/" + std::to_string(b.total));
    }
    io::write_text_atomic(base + ".csv", csv.str());
    render::bar_chart_png(base + ".png", {title, "detected cells", "fraction correct", 0.0, 1.0}, labels, values, notes);
}

// ---------------------------------------------------------------- synth

struct SynthArgs
{
    std::string spec;
    std::string preset;
    std::string out;
    int n = 0;
    std::uint64_t seed = 0;
    std::string domain = "target";
};

int cmd_synth(const SynthArgs& a, const Context& ctx)
{
    if (a.spec.empty() == a.preset.empty()) throw UsageError("synth: give exactly one of --spec or --preset");
    SyntheticDomainSpec spec;
    if (!a.spec.empty()) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(io::read_text(a.spec));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(a.spec + ": " + e.what());
        }
        spec = spec_from_json(j);
    } else {
        spec = cell_shape_from_string(a.preset) == CellShape::round ? SyntheticDomainSpec::round_preset()
                                                                     : SyntheticDomainSpec::elongated_preset();
    }
    if (a.domain != "source" && a.domain != "target") throw UsageError("synth: --domain must be source or target");
    const auto patches = generate_synthetic_dataset(spec, a.n, a.seed, a.domain == "source" ? Domain::source : Domain::target);
    save_dataset(a.out, patches, {{"generator", to_json(spec)}, {"seed", a.seed}});
    ctx.log("wrote " + std::to_string(patches.size()) + " " + to_string(spec.shape) + " patches to " + a.out);
    return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs
{
    ConfigArgs config;
    std::string source;
    std::string out;
    std::string disc_out;
};

int cmd_train(const TrainArgs& a, const Context& ctx)
{
    const auto cfg = resolve_config(a.config);
    const auto source = load_source(a.source, cfg, ctx);
    auto cfg0 = cfg;
    cfg0.iterations = 0;
    ctx.log("training baseline models");
    auto models = train_baseline(source, cfg0);
    const fs::path out(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    models.detector.save(out);
    const fs::path disc = a.disc_out.empty() ? fs::path(a.out + ".disc") : fs::path(a.disc_out);
    models.discriminator.save(disc);
    ctx.log("detector -> " + out.string() + ", discriminator -> " + disc.string());
    return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs
{
    ConfigArgs config;
    std::string model;
    std::string data;
    std::string out;
};

int cmd_eval(const EvalArgs& a, const Context& ctx)
{
    const auto cfg = resolve_config(a.config);
    const auto model = DetectorModel::load(a.model);
    auto ds = load_dataset(a.data, Domain::target);
    if (!ds.has_truth) throw DataError("eval: dataset " + a.data + " lacks ground truth");
    const int window = std::max(1, static_cast<int>(std::floor(cfg.sigma)));
    DetectionCounts c;
    std::vector<PointSet> detected;
    std::ostringstream per_patch;
    per_patch << "source_id,n_truth,n_detected,tp,fp,fn,correct\n";
    for (const auto& p : ds.patches) {
        detected.push_back(detect_peaks(model.predict(p.patch), cfg.th_d, window));
        const auto m = match_points(detected.back(), p.points, cfg.match_threshold);
        c += counts_of(m);
        per_patch << p.patch.source_id << ',' << p.points.size() << ',' << detected.back().size() << ',' << m.tp << ','
                  << m.fp << ',' << m.fn << ',' << (m.fp == 0 && m.fn == 0 ? "true" : "false") << '\n';
    }
    std::vector<AuditedLabel> audited;
    for (std::size_t i = 0; i < ds.patches.size(); ++i) audited.push_back({&detected[i], &ds.patches[i].points});
    const auto hist = accuracy_by_cell_count(audited, cfg.match_threshold);
    const fs::path out(a.out);
    const auto stem = out.parent_path() / out.stem();
    io::write_text_atomic(stem.string() + "_patches.csv", per_patch.str());
    write_histogram(stem.string() + "_count_accuracy", hist, "Prediction accuracy by detected count");
    const auto f = f1_score(c);
    const nlohmann::json j = {{"model", a.model},
                              {"data", a.data},
                              {"n_patches", ds.patches.size()},
                              {"tp", c.tp},
                              {"fp", c.fp},
                              {"fn", c.fn},
                              {"precision", f.precision},
                              {"recall", f.recall},
                              {"f1", f.f1},
                              {"th_d", cfg.th_d},
                              {"sigma", cfg.sigma},
                              {"match_threshold", cfg.match_threshold}};
    io::write_text_atomic(a.out, j.dump(2) + "\n");
    ctx.log("f1 " + fmt(f.f1) + " (precision " + fmt(f.precision) + ", recall " + fmt(f.recall) + ") -> " + a.out);
    return kOk;
}

// ---------------------------------------------------------------- adapt

struct AdaptArgs
{
    ConfigArgs config;
    std::string source;
    std::string target;
    std::string out;
    std::vector<std::string> audit_gt;
    std::string resume;
    std::optional<int> stop_after;
};

AdaptationReport adapt(const fs::path& run_dir, const fs::path& source_dir, const fs::path& target_dir,
                       const std::vector<std::string>& audit_dirs, const AdaptationConfig& cfg, bool resume, std::optional<int> stop_after,
                       const Context& ctx)
{
    const auto source = load_source(source_dir, cfg, ctx);
    const auto pool = load_pool(target_dir, cfg, ctx);
    std::optional<AuditData> audit;
    if (!audit_dirs.empty()) audit = load_audit(audit_dirs, pool, ctx);

    fs::create_directories(run_dir);
    nlohmann::json audits = nlohmann::json::array();
    for (const auto& d : audit_dirs) audits.push_back(fs::absolute(d).string());
    const nlohmann::json run = {{"source", fs::absolute(source_dir).string()},
                                {"target", fs::absolute(target_dir).string()},
                                {"audit_gt", audits}};
    const auto config_path = run_dir / "config.txt";
    auto same = [](AdaptationConfig x, AdaptationConfig y) {
        x.workers = y.workers = 1;
        return x == y;
    };
    if (resume && fs::exists(config_path) && !same(load_config(config_path), cfg))
        throw UsageError("resume: configuration differs from the one stored in " + config_path.string());

    RunOptions o;
    o.run_dir = run_dir;
    o.resume = resume;
    o.stop_after = stop_after;
    o.log = [&](const std::string& s) { ctx.log(s); };
    // run_adaptation takes the lock and refuses a used directory before anything is written here.
    auto report = run_adaptation(source, pool, cfg, audit ? &*audit : nullptr, o);
    io::write_text_atomic(run_dir / "run.json", run.dump(2) + "\n");
    io::write_text_atomic(config_path, dump_config(cfg));
    return report;
}

int cmd_adapt(const AdaptArgs& a, const Context& ctx)
{
    const bool resume = !a.resume.empty();
    if (resume && !a.out.empty() && fs::path(a.out) != fs::path(a.resume))
        throw UsageError("adapt: --out and --resume name different run directories");
    const fs::path run_dir = resume ? fs::path(a.resume) : fs::path(a.out);
    if (run_dir.empty()) throw UsageError("adapt: --out is required");

    std::string source = a.source, target = a.target;
    auto audit = a.audit_gt;
    if (resume && fs::exists(run_dir / "run.json")) {
        const auto run = nlohmann::json::parse(io::read_text(run_dir / "run.json"));
        if (source.empty()) source = run.value("source", "");
        if (target.empty()) target = run.value("target", "");
        if (audit.empty()) audit = run.value("audit_gt", std::vector<std::string>{});
    }
    if (source.empty() || target.empty()) throw UsageError("adapt: --source and --target are required");
    const auto cfg = resolve_config(a.config, resume ? run_dir / "config.txt" : fs::path());
    const auto report = adapt(run_dir, source, target, audit, cfg, resume, a.stop_after, ctx);
    const auto& last = report.iterations.back();
    ctx.log("done: " + std::to_string(report.iterations.size() - 1) + " iterations, " + std::to_string(last.cumulative_pseudo)
            + " pseudo labels" + (last.f1_target ? ", f1_target " + fmt(*last.f1_target) : std::string()));
    return kOk;
}

// ---------------------------------------------------------------- inspect

struct InspectArgs
{
    std::string run;
    std::string out;
    int n = 6;
};

int cmd_inspect(const InspectArgs& a, const Context& ctx)
{
    const fs::path run(a.run);
    if (!fs::exists(run / "report.json")) throw DataError("inspect: no report.json in " + run.string());
    const auto report = AdaptationReport::from_json(nlohmann::json::parse(io::read_text(run / "report.json")));
    const auto& cfg = report.config;
    const fs::path out(a.out);
    fs::create_directories(out);

    render::Series target{"target F1", {}, {}}, source{"source F1", {}, {}};
    std::ostringstream curve;
    curve << "iteration,cumulative_pseudo,f1_target,f1_source\n";
    for (const auto& r : report.iterations) {
        const double x = static_cast<double>(r.cumulative_pseudo);
        if (r.f1_target) {
            target.x.push_back(x);
            target.y.push_back(*r.f1_target);
        }
        source.x.push_back(x);
        source.y.push_back(r.f1_source);
        curve << r.iteration << ',' << r.cumulative_pseudo << ',' << (r.f1_target ? fmt(*r.f1_target) : "") << ','
              << fmt(r.f1_source) << '\n';
    }
    std::vector<render::Series> series;
    if (!target.x.empty()) series.push_back(target);
    series.push_back(source);
    render::line_chart_png(out / "f1_vs_pseudo.png", {"Detection F1 by number of pseudo labels", "cumulative pseudo labels", "F1", 0.0, 1.0}, series);
    io::write_text_atomic(out / "f1_vs_pseudo.csv", curve.str());

    for (const auto& r : report.iterations) {
        if (r.count_accuracy.empty()) continue;
        write_histogram((out / ("count_accuracy_iter_" + std::to_string(r.iteration))).string(), r.count_accuracy,
                        "Pseudo-label accuracy by detected count, iteration " + std::to_string(r.iteration));
    }

    // Overlays need the pool images, found through run.json.
    if (fs::exists(run / "run.json")) {
        const auto info = nlohmann::json::parse(io::read_text(run / "run.json"));
        const fs::path target_dir = info.value("target", "");
        if (!target_dir.empty() && fs::exists(target_dir)) {
            const auto ds = load_dataset(target_dir, Domain::target);
            std::map<std::string, std::size_t> by_id;
            for (std::size_t i = 0; i < ds.patches.size(); ++i) by_id[ds.patches[i].patch.source_id] = i;
            const int last = report.iterations.back().iteration;
            const auto model = DetectorModel::load(run / ("iter_" + std::to_string(last)) / "detector.ckpt");
            const int window = std::max(1, static_cast<int>(std::floor(cfg.sigma)));
            // Admitted patches first, in admission order, then the rest of the pool.
            std::vector<std::pair<std::string, std::size_t>> picks;
            std::vector<bool> taken(ds.patches.size(), false);
            for (int k = 1; k <= last; ++k) {
                for (const auto& lab : read_admitted_csv(run / ("iter_" + std::to_string(k)) / "admitted.csv", k,
                                                         cfg.patch, cfg.patch)) {
                    const auto it = by_id.find(lab.source_id);
                    if (it == by_id.end() || taken[it->second]) continue;
                    taken[it->second] = true;
                    picks.push_back({"admitted_iter_" + std::to_string(k) + "_", it->second});
                }
            }
            for (std::size_t i = 0; i < ds.patches.size(); ++i)
                if (!taken[i]) picks.push_back({"pool_", i});
            int drawn = 0;
            for (const auto& [prefix, i] : picks) {
                if (drawn >= a.n) break;
                const auto& p = ds.patches[i];
                const auto pred = model.predict(p.patch);
                const PointSet* truth = ds.has_truth ? &p.points : nullptr;
                render::overlay_png(out / "overlays" / (prefix + p.patch.source_id + ".png"), p.patch, pred,
                                    detect_peaks(pred, cfg.th_d, window), truth);
                ++drawn;
            }
            ctx.log("rendered " + std::to_string(drawn) + " overlays");
        }
    }
    ctx.log("figures -> " + out.string());
    return kOk;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs
{
    ConfigArgs config;
    std::string param;
    std::vector<std::string> values;
    std::string source;
    std::string target;
    std::vector<std::string> audit_gt;
    std::string out;
};

int cmd_sweep(const SweepArgs& a, const Context& ctx)
{
    if (a.param != "th_u" && a.param != "N_c") throw UsageError("sweep: --param must be th_u or N_c");
    if (a.values.empty()) throw UsageError("sweep: --values is empty");
    const auto base = resolve_config(a.config);
    const fs::path out(a.out);
    fs::create_directories(out);
    std::ostringstream csv;
    csv << "param,value,final_f1_target,baseline_f1_target,cumulative_pseudo\n";
    nlohmann::json rows = nlohmann::json::array();
    render::Series series{a.param, {}, {}};
    for (const auto& v : a.values) {
        auto cfg = base;
        set_config_value(cfg, a.param, v);
        cfg.validate();
        const fs::path dir = out / (a.param + "_" + v);
        const bool resume = fs::exists(dir / "iter_0" / "report.json");
        ctx.log("sweep " + a.param + " = " + v + (resume ? " (resuming)" : ""));
        const auto report = adapt(dir, a.source, a.target, a.audit_gt, cfg, resume, std::nullopt, ctx);
        const auto& first = report.iterations.front();
        const auto& last = report.iterations.back();
        const double value = std::stod(v);
        const auto final_f1 = last.f1_target;
        csv << a.param << ',' << v << ',' << (final_f1 ? fmt(*final_f1) : "") << ','
            << (first.f1_target ? fmt(*first.f1_target) : "") << ',' << last.cumulative_pseudo << '\n';
        rows.push_back({{"value", value},
                        {"final_f1_target", final_f1 ? nlohmann::json(*final_f1) : nlohmann::json()},
                        {"baseline_f1_target", first.f1_target ? nlohmann::json(*first.f1_target) : nlohmann::json()},
                        {"cumulative_pseudo", last.cumulative_pseudo}});
        if (final_f1) {
            series.x.push_back(value);
            series.y.push_back(*final_f1);
        }
    }
    io::write_text_atomic(out / "sweep.csv", csv.str());
    nlohmann::json summary = {{"param", a.param}, {"rows", rows}};
    if (!series.y.empty()) {
        const auto [lo, hi] = std::minmax_element(series.y.begin(), series.y.end());
        summary["f1_range"] = *hi - *lo;
        render::line_chart_png(out / "sweep.png", {"Final target F1 by " + a.param, a.param, "F1", 0.0, 1.0}, {series});
    }
    io::write_text_atomic(out / "sweep.json", summary.dump(2) + "\n");
    ctx.log("sweep table -> " + (out / "sweep.csv").string());
    return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Cell detection with domain extension by pseudo labels"};
    app.name("celluda");
    app.footer(config_help());
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "suppress progress messages");

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "generate a synthetic patch dataset");
    s->add_option("--spec", synth.spec, "generator spec (JSON)");
    s->add_option("--preset", synth.preset, "ROUND or ELONGATED instead of --spec");
    s->add_option("--out", synth.out, "output directory")->required();
    s->add_option("--n", synth.n, "number of patches")->required();
    s->add_option("--seed", synth.seed, "random seed")->required();
    s->add_option("--domain", synth.domain, "source or target tag")->capture_default_str();

    TrainArgs train;
    auto* t = app.add_subcommand("train", "source-only training of detector and discriminator");
    t->add_option("--source", train.source, "labeled source dataset")->required();
    t->add_option("--out", train.out, "detector checkpoint")->required();
    t->add_option("--disc-out", train.disc_out, "discriminator checkpoint (default <out>.disc)");
    add_config_options(t, train.config);

    AdaptArgs adapt_args;
    auto* ad = app.add_subcommand("adapt", "iterative domain extension on an unlabeled target pool");
    ad->add_option("--source", adapt_args.source, "labeled source dataset");
    ad->add_option("--target", adapt_args.target, "unlabeled target dataset (its labels are never read)");
    ad->add_option("--out", adapt_args.out, "run directory");
    ad->add_option("--audit-gt", adapt_args.audit_gt,
                   "labeled target dataset for reporting only (repeatable); ids in the pool audit selection, "
                   "the rest give f1_target");
    ad->add_option("--resume", adapt_args.resume, "continue the run in this directory");
    ad->add_option("--stop-after", adapt_args.stop_after, "stop once this iteration is persisted");
    add_config_options(ad, adapt_args.config);

    EvalArgs eval;
    auto* e = app.add_subcommand("eval", "micro-averaged detection F1 of a detector checkpoint");
    e->add_option("--model", eval.model, "detector checkpoint")->required();
    e->add_option("--data", eval.data, "labeled dataset")->required();
    e->add_option("--out", eval.out, "output JSON")->required();
    add_config_options(e, eval.config);

    InspectArgs inspect;
    auto* in = app.add_subcommand("inspect", "render figures for a run directory");
    in->add_option("--run", inspect.run, "run directory")->required();
    in->add_option("--out", inspect.out, "figure directory")->required();
    in->add_option("--n", inspect.n, "overlays to draw")->capture_default_str();

    SweepArgs sweep;
    auto* sw = app.add_subcommand("sweep", "rerun adapt per parameter value and tabulate final F1");
    sw->add_option("--param", sweep.param, "th_u or N_c")->required();
    sw->add_option("--values", sweep.values, "comma-separated values")->required()->delimiter(',');
    sw->add_option("--source", sweep.source, "labeled source dataset")->required();
    sw->add_option("--target", sweep.target, "unlabeled target dataset")->required();
    sw->add_option("--audit-gt", sweep.audit_gt, "labeled target dataset for reporting (repeatable)")->required();
    sw->add_option("--out", sweep.out, "sweep directory")->required();
    add_config_options(sw, sweep.config);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex, out, err);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex, out, err);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex, out, err);
        return kUsage;
    }

    Context ctx{out, err, quiet};
    try {
        if (*s) return cmd_synth(synth, ctx);
        if (*t) return cmd_train(train, ctx);
        if (*ad) return cmd_adapt(adapt_args, ctx);
        if (*e) return cmd_eval(eval, ctx);
        if (*in) return cmd_inspect(inspect, ctx);
        if (*sw) return cmd_sweep(sweep, ctx);
    } catch (const UsageError& ex) {
        err << "error: " << ex.what() << '\n';
        return kUsage;
    } catch (const DataError& ex) {
        err << "data error: " << ex.what() << '\n';
        return kData;
    } catch (const TrainingError& ex) {
        err << "training diverged: " << ex.what() << '\n';
        return kDivergence;
    } catch (const nlohmann::json::exception& ex) {
        err << "data error: " << ex.what() << '\n';
        return kData;
    } catch (const std::filesystem::filesystem_error& ex) {
        err << "data error: " << ex.what() << '\n';
        return kData;
    }
    return kUsage;
}

} // namespace celluda::cli
