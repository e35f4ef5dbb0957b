#include <celluda/errors.hpp>
#include <celluda/io.hpp>
#include <celluda/orchestrator.hpp>
#include <celluda/synthetic.hpp>

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace celluda;
namespace fs = std::filesystem;

namespace {

SyntheticDomainSpec small_spec(CellShape shape)
{
    auto s = shape == CellShape::round ? SyntheticDomainSpec::round_preset() : SyntheticDomainSpec::elongated_preset();
    s.patch_size = 32;
    s.radius_min = 3.0;
    s.radius_max = 4.0;
    s.cells_min = 0;
    s.cells_max = 3;
    s.min_separation = 10.0;
    s.border = 4.0;
    return s;
}

AdaptationConfig small_config()
{
    AdaptationConfig c;
    c.patch = 32;
    c.sigma = 3.0;
    c.match_threshold = 5.0;
    c.neg_min_dist = 8.0;
    c.th_d = 60.0;
    c.th_u = 0.5;
    c.T = 3;
    c.iterations = 2;
    c.epochs = 3;
    c.disc_epochs = 3;
    c.batch_size = 4;
    c.detector_width = 4;
    c.detector_levels = 2;
    c.discriminator_width = 4;
    c.seed = 17;
    return c;
}

struct Fixture
{
    std::vector<LabeledSample> source;
    std::vector<Patch> pool;
    AuditData audit;
};

Fixture fixture(CellShape target = CellShape::elongated)
{
    Fixture f;
    for (auto& a : generate_synthetic_dataset(small_spec(CellShape::round), 6, 1))
        f.source.push_back(make_labeled_sample(a.patch, a.points, 3.0));
    for (auto& a : generate_synthetic_dataset(small_spec(target), 12, 2, Domain::target)) {
        f.pool.push_back(a.patch);
        f.audit.pool_truth.push_back(a.points);
    }
    f.audit.heldout = generate_synthetic_dataset(small_spec(target), 4, 3, Domain::target);
    return f;
}

RunOptions at(const fs::path& dir)
{
    RunOptions o;
    o.run_dir = dir;
    return o;
}

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("celluda_orch_" + name);
    fs::remove_all(p);
    return p;
}

std::vector<std::string> admitted_ids(const fs::path& dir)
{
    std::vector<std::string> ids;
    for (const auto& a : read_admitted_csv(dir / "admitted.csv", 0, 32, 32)) ids.push_back(a.source_id);
    return ids;
}

std::set<std::string> scored_ids(const fs::path& dir)
{
    std::set<std::string> ids;
    std::istringstream is(io::read_text(dir / "scores.csv"));
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) ids.insert(line.substr(0, line.find(',')));
    return ids;
}

} // namespace

TEST(RunAdaptation, RejectsEmptyInputs)
{
    const auto f = fixture();
    EXPECT_THROW(run_adaptation({}, f.pool, small_config()), UsageError);
    EXPECT_THROW(run_adaptation(f.source, {}, small_config()), UsageError);
    auto bad = small_config();
    bad.th_u = 0.0;
    EXPECT_THROW(run_adaptation(f.source, f.pool, bad), UsageError);
}

TEST(RunAdaptation, ZeroIterationsIsSourceOnlyTraining)
{
    const auto f = fixture();
    auto cfg = small_config();
    cfg.iterations = 0;
    const auto dir = scratch("zero");
    const auto report = run_adaptation(f.source, f.pool, cfg, &f.audit, at(dir));
    ASSERT_EQ(report.iterations.size(), 1u);
    EXPECT_EQ(report.iterations[0].iteration, 0);
    EXPECT_EQ(report.iterations[0].cumulative_pseudo, 0u);

    const auto base = train_baseline(f.source, cfg);
    const auto loaded = DetectorModel::load(dir / "iter_0" / "detector.ckpt");
    EXPECT_TRUE((base.detector.predict(f.pool[0]).values() == loaded.predict(f.pool[0]).values()).all());
    EXPECT_DOUBLE_EQ(*report.iterations[0].f1_target, f1_score(evaluate_detector(base.detector, f.audit.heldout, cfg)).f1);
}

TEST(RunAdaptation, InvariantsAcrossIterations)
{
    const auto f = fixture();
    auto cfg = small_config();
    cfg.iterations = 3;
    const auto dir = scratch("invariants");
    const auto report = run_adaptation(f.source, f.pool, cfg, &f.audit, at(dir));
    ASSERT_EQ(report.iterations.size(), 4u);

    std::set<std::string> admitted_so_far;
    std::size_t cumulative = 0;
    for (int k = 1; k <= 3; ++k) {
        const auto& r = report.iterations[static_cast<std::size_t>(k)];
        const auto idir = dir / ("iter_" + std::to_string(k));
        // Earlier admissions are never re-scored.
        const auto scored = scored_ids(idir);
        for (const auto& id : admitted_so_far) EXPECT_EQ(scored.count(id), 0u) << id;
        EXPECT_EQ(r.pool_size, f.pool.size() - admitted_so_far.size());
        EXPECT_EQ(r.n_scored, r.pool_size);
        EXPECT_LE(r.n_uncertainty_selected, static_cast<std::size_t>(std::ceil(cfg.th_u * static_cast<double>(r.pool_size))));
        EXPECT_LE(r.n_curriculum_admitted, r.n_uncertainty_selected);
        EXPECT_EQ(r.cap, 2 + (k - 1) * cfg.N_c);
        for (const auto& a : read_admitted_csv(idir / "admitted.csv", k, 32, 32)) {
            EXPECT_GE(static_cast<int>(a.points.size()), 1);
            EXPECT_LE(static_cast<int>(a.points.size()), r.cap);
            EXPECT_TRUE(admitted_so_far.insert(a.source_id).second);
        }
        cumulative += r.n_curriculum_admitted;
        EXPECT_EQ(r.cumulative_pseudo, cumulative);
        EXPECT_GE(r.cumulative_pseudo, report.iterations[static_cast<std::size_t>(k - 1)].cumulative_pseudo);
        EXPECT_TRUE(r.selection_accuracy.has_value() || r.n_curriculum_admitted == 0);
        EXPECT_TRUE(r.f1_target.has_value());
    }
    EXPECT_GT(cumulative, 0u);
    EXPECT_EQ(AdaptationReport::from_json(report.to_json()).to_json(), report.to_json());
}

TEST(RunAdaptation, SameSeedReproducesReportByteForByte)
{
    const auto f = fixture();
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    auto cfg = small_config();
    run_adaptation(f.source, f.pool, cfg, &f.audit, at(a));
    cfg.workers = 3;
    run_adaptation(f.source, f.pool, cfg, &f.audit, at(b));
    // workers only changes scheduling; compare everything except that key.
    auto ja = nlohmann::json::parse(io::read_text(a / "report.json"));
    auto jb = nlohmann::json::parse(io::read_text(b / "report.json"));
    ja["config"].erase("workers");
    jb["config"].erase("workers");
    EXPECT_EQ(ja.dump(), jb.dump());
    for (int k = 1; k <= 2; ++k) {
        const auto sub = "iter_" + std::to_string(k);
        EXPECT_EQ(io::read_text(a / sub / "admitted.csv"), io::read_text(b / sub / "admitted.csv"));
        EXPECT_EQ(io::read_text(a / sub / "scores.csv"), io::read_text(b / sub / "scores.csv"));
    }

    const auto c = scratch("det_c");
    run_adaptation(f.source, f.pool, small_config(), &f.audit, at(c));
    EXPECT_EQ(io::read_text(a / "report.json"), io::read_text(c / "report.json"));
    EXPECT_EQ(io::read_text(a / "report.csv"), io::read_text(c / "report.csv"));
}

TEST(RunAdaptation, ResumeAfterInterruptionMatchesUninterruptedRun)
{
    const auto f = fixture();
    const auto full = scratch("resume_full");
    const auto part = scratch("resume_part");
    run_adaptation(f.source, f.pool, small_config(), &f.audit, at(full));

    auto o = at(part);
    o.stop_after = 1;
    const auto first = run_adaptation(f.source, f.pool, small_config(), &f.audit, o);
    EXPECT_EQ(first.iterations.size(), 2u);
    EXPECT_FALSE(fs::exists(part / "iter_2"));
    // A fresh run into a used directory is refused.
    EXPECT_THROW(run_adaptation(f.source, f.pool, small_config(), &f.audit, at(part)), UsageError);

    auto r = at(part);
    r.resume = true;
    const auto resumed = run_adaptation(f.source, f.pool, small_config(), &f.audit, r);
    EXPECT_EQ(resumed.iterations.size(), 3u);
    EXPECT_EQ(io::read_text(full / "report.json"), io::read_text(part / "report.json"));
    EXPECT_EQ(io::read_text(full / "iter_2" / "admitted.csv"), io::read_text(part / "iter_2" / "admitted.csv"));
    EXPECT_EQ(admitted_ids(full / "iter_1"), admitted_ids(part / "iter_1"));
}

TEST(RunAdaptation, IncompleteIterationIsRedone)
{
    const auto f = fixture();
    const auto full = scratch("partial_full");
    const auto dir = scratch("partial");
    run_adaptation(f.source, f.pool, small_config(), &f.audit, at(full));
    auto o = at(dir);
    o.stop_after = 1;
    run_adaptation(f.source, f.pool, small_config(), &f.audit, o);
    // Simulate a crash after checkpoints were written but before the marker.
    fs::remove(dir / "iter_1" / "report.json");
    auto r = at(dir);
    r.resume = true;
    run_adaptation(f.source, f.pool, small_config(), &f.audit, r);
    EXPECT_EQ(io::read_text(full / "report.json"), io::read_text(dir / "report.json"));
}

TEST(RunAdaptation, EmptyAdmissionContinues)
{
    const auto f = fixture();
    auto cfg = small_config();
    cfg.th_d = 254.0;
    const auto report = run_adaptation(f.source, f.pool, cfg, &f.audit);
    ASSERT_EQ(report.iterations.size(), 3u);
    for (const auto& r : report.iterations) EXPECT_EQ(r.n_curriculum_admitted, 0u);
    EXPECT_EQ(report.iterations.back().pool_size, f.pool.size());
}

TEST(RunAdaptation, LockedDirectoryIsRefused)
{
    const auto f = fixture();
    const auto dir = scratch("locked");
    fs::create_directories(dir);
    RunLock held(dir);
    EXPECT_THROW(run_adaptation(f.source, f.pool, small_config(), &f.audit, at(dir)), UsageError);
}

TEST(AdmittedCsv, RoundTrip)
{
    const auto p = fs::temp_directory_path() / "celluda_admitted.csv";
    std::vector<AdmittedLabel> labels{{3, "x-1", PointSet({{1.5, 2}, {10, 20}}, 32, 32), 0.9, 0.3, 2},
                                      {7, "x-2", PointSet(32, 32), 0.8, 0.5, 2}};
    write_admitted_csv(p, labels);
    const auto back = read_admitted_csv(p, 2, 32, 32);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].points, labels[0].points);
    EXPECT_EQ(back[1].source_id, "x-2");
    EXPECT_EQ(back[0].mean_prob, 0.9);
}
