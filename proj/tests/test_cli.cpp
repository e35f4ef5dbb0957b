#include "cli.hpp"

#include <celluda/config.hpp>
#include <celluda/errors.hpp>
#include <celluda/io.hpp>
#include <celluda/render.hpp>

#include <gtest/gtest.h>

#include <json.hpp>

#include <fstream>
#include <sstream>

using namespace celluda;
namespace fs = std::filesystem;

namespace {

struct Result
{
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    args.insert(args.begin(), "--quiet");
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test
{
protected:
    static void SetUpTestSuite()
    {
        root_ = fs::temp_directory_path() / "celluda_cli";
        fs::remove_all(root_);
        fs::create_directories(root_);
        write(root_ / "round.json", R"({"cell_shape":"ROUND","patch_size":32,"radius_min":3,"radius_max":4,
            "cells_min":1,"cells_max":3,"min_separation":10,"border":4})");
        write(root_ / "elong.json", R"({"cell_shape":"ELONGATED","patch_size":32,"radius_min":3,"radius_max":4,
            "aspect_min":2,"aspect_max":3,"cells_min":0,"cells_max":3,"min_separation":10,"border":4})");
        write(root_ / "tiny.cfg", "patch = 32\nsigma = 3\nmatch_threshold = 5\nneg_min_dist = 8\nth_d = 60\n"
                                  "th_u = 0.5\nT = 3\niterations = 2\nepochs = 3\ndisc_epochs = 3\nbatch_size = 4\n"
                                  "detector_width = 4\ndetector_levels = 2\ndiscriminator_width = 4\nseed = 5\n");
        ASSERT_EQ(run({"synth", "--spec", str("round.json"), "--out", str("src"), "--n", "6", "--seed", "1", "--domain", "source"}).code, 0);
        ASSERT_EQ(run({"synth", "--spec", str("elong.json"), "--out", str("tgt"), "--n", "10", "--seed", "2"}).code, 0);
        ASSERT_EQ(run({"synth", "--spec", str("elong.json"), "--out", str("held"), "--n", "4", "--seed", "3"}).code, 0);
    }

    static void write(const fs::path& p, const std::string& s)
    {
        std::ofstream os(p);
        os << s;
    }

    static std::string str(const std::string& rel) { return (root_ / rel).string(); }

    static fs::path root_;
};

fs::path Cli::root_;

} // namespace

TEST_F(Cli, HelpListsEveryConfigKeyWithDefault)
{
    const auto r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    for (const auto& e : config_schema()) {
        const auto pos = r.out.find("  " + e.key + " ");
        ASSERT_NE(pos, std::string::npos) << e.key;
        EXPECT_NE(r.out.find(e.default_value, pos), std::string::npos) << e.key;
    }
}

TEST_F(Cli, SynthIsDeterministic)
{
    ASSERT_EQ(run({"synth", "--spec", str("elong.json"), "--out", str("tgt2"), "--n", "10", "--seed", "2"}).code, 0);
    for (const auto* f : {"manifest.json", "gt/00003.csv"})
        EXPECT_EQ(io::read_text(root_ / "tgt" / f), io::read_text(root_ / "tgt2" / f));
    EXPECT_TRUE((io::read_image(root_ / "tgt/images/00007.png") == io::read_image(root_ / "tgt2/images/00007.png")).all());
}

TEST_F(Cli, EvalOnGroundTruthIsPerfectForAPerfectDetector)
{
    // A detector trained long enough on a handful of patches reproduces their truth.
    ASSERT_EQ(run({"train", "--source", str("src"), "--config", str("tiny.cfg"), "--set", "epochs=150", "--set",
                   "detector_width=8", "--out", str("memo.ckpt")})
                  .code,
              0);
    ASSERT_EQ(run({"eval", "--model", str("memo.ckpt"), "--data", str("src"), "--config", str("tiny.cfg"), "--out", str("memo.json")}).code, 0);
    const auto j = nlohmann::json::parse(io::read_text(root_ / "memo.json"));
    EXPECT_EQ(j.at("n_patches"), 6);
    EXPECT_DOUBLE_EQ(j.at("f1").get<double>(), 1.0) << j.dump();
    const auto rows = io::read_text(root_ / "memo_patches.csv");
    EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 7);
    EXPECT_EQ(rows.find("false"), std::string::npos);
    EXPECT_TRUE(fs::exists(root_ / "memo_count_accuracy.csv"));
    EXPECT_TRUE(fs::exists(root_ / "memo_count_accuracy.png"));
}

TEST_F(Cli, AdaptWithZeroIterationsEqualsTrainThenEval)
{
    ASSERT_EQ(run({"train", "--source", str("src"), "--config", str("tiny.cfg"), "--out", str("base.ckpt")}).code, 0);
    ASSERT_EQ(run({"eval", "--model", str("base.ckpt"), "--data", str("held"), "--config", str("tiny.cfg"), "--out", str("base.json")}).code, 0);
    ASSERT_EQ(run({"adapt", "--source", str("src"), "--target", str("tgt"), "--audit-gt", str("held"), "--config",
                   str("tiny.cfg"), "--set", "iterations=0", "--out", str("run0")})
                  .code,
              0);
    const auto report = nlohmann::json::parse(io::read_text(root_ / "run0/report.json"));
    ASSERT_EQ(report.at("iterations").size(), 1u);
    const auto eval = nlohmann::json::parse(io::read_text(root_ / "base.json"));
    EXPECT_DOUBLE_EQ(report["iterations"][0]["f1_target"].get<double>(), eval.at("f1").get<double>());
    EXPECT_EQ(io::read_text(root_ / "base.ckpt"), io::read_text(root_ / "run0/iter_0/detector.ckpt"));
}

TEST_F(Cli, AdaptResumeAndInspect)
{
    const auto full = run({"adapt", "--source", str("src"), "--target", str("tgt"), "--audit-gt", str("tgt"), "--audit-gt", str("held"), "--config",
                           str("tiny.cfg"), "--out", str("runA")});
    ASSERT_EQ(full.code, 0) << full.err;
    ASSERT_EQ(run({"adapt", "--source", str("src"), "--target", str("tgt"), "--audit-gt", str("tgt"), "--audit-gt", str("held"),
                   "--config", str("tiny.cfg"), "--out", str("runB"), "--stop-after", "1"})
                  .code,
              0);
    // A second fresh run into the same directory is refused.
    EXPECT_EQ(run({"adapt", "--source", str("src"), "--target", str("tgt"), "--config", str("tiny.cfg"), "--out", str("runB")}).code, 2);
    // Resume reads sources and configuration back from the run directory.
    const auto resumed = run({"adapt", "--resume", str("runB")});
    ASSERT_EQ(resumed.code, 0) << resumed.err;
    EXPECT_EQ(io::read_text(root_ / "runA/report.json"), io::read_text(root_ / "runB/report.json"));
    // Changing the configuration on resume is refused.
    EXPECT_EQ(run({"adapt", "--resume", str("runB"), "--set", "th_u=0.3"}).code, 2);

    const auto r = run({"inspect", "--run", str("runA"), "--out", str("figs")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(root_ / "figs/f1_vs_pseudo.png"));
    EXPECT_TRUE(fs::exists(root_ / "figs/f1_vs_pseudo.csv"));
    EXPECT_TRUE(fs::exists(root_ / "figs/count_accuracy_iter_1.png"));
    EXPECT_TRUE(fs::exists(root_ / "figs/count_accuracy_iter_1.csv"));
    int overlays = 0;
    for (const auto& e : fs::directory_iterator(root_ / "figs/overlays")) overlays += e.path().extension() == ".png";
    EXPECT_EQ(overlays, 6);
    EXPECT_GT(io::read_image(root_ / "figs/f1_vs_pseudo.png").size(), 0);
}

TEST_F(Cli, SweepTabulatesFinalF1)
{
    const auto r = run({"sweep", "--param", "th_u", "--values", "0.3,0.6", "--source", str("src"), "--target", str("tgt"),
                        "--audit-gt", str("held"), "--config", str("tiny.cfg"), "--set", "iterations=1", "--out", str("sweep")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(io::read_text(root_ / "sweep/sweep.json"));
    EXPECT_EQ(j.at("rows").size(), 2u);
    EXPECT_TRUE(j.contains("f1_range"));
    EXPECT_TRUE(fs::exists(root_ / "sweep/sweep.png"));
    EXPECT_TRUE(fs::exists(root_ / "sweep/th_u_0.6/report.json"));
    EXPECT_EQ(run({"sweep", "--param", "sigma", "--values", "1", "--source", str("src"), "--target", str("tgt"),
                   "--audit-gt", str("held"), "--out", str("sweep2")})
                  .code,
              2);
}

TEST_F(Cli, ExitCodes)
{
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"synth", "--bogus"}).code, 2);
    EXPECT_EQ(run({"train", "--source", str("missing"), "--config", str("tiny.cfg"), "--out", str("x.ckpt")}).code, 3);
    write(root_ / "bad.cfg", "th_u = 2\n");
    EXPECT_EQ(run({"train", "--source", str("src"), "--config", str("bad.cfg"), "--out", str("x.ckpt")}).code, 2);
    EXPECT_EQ(run({"train", "--source", str("src"), "--config", str("missing.cfg"), "--out", str("x.ckpt")}).code, 2);
    EXPECT_EQ(run({"eval", "--model", str("missing.ckpt"), "--data", str("src"), "--out", str("x.json")}).code, 3);
    // Default patch size does not match the 32 px dataset.
    EXPECT_EQ(run({"train", "--source", str("src"), "--out", str("x.ckpt")}).code, 2);
    // A learning rate this large drives the loss to infinity.
    EXPECT_EQ(run({"train", "--source", str("src"), "--config", str("tiny.cfg"), "--set", "lr=1e30", "--out", str("x.ckpt")}).code, 4);
}

TEST(Render, WritesPngFiles)
{
    const auto dir = fs::temp_directory_path() / "celluda_render";
    fs::remove_all(dir);
    Patch p;
    p.pixels = Image::Constant(16, 16, 100.0);
    const Heatmap h = Heatmap(Image::Constant(16, 16, 10.0), 2.0);
    const PointSet pts({{3, 4}}, 16, 16);
    render::overlay_png(dir / "o.png", p, h, pts, &pts, 2);
    EXPECT_EQ(io::read_image(dir / "o.png").cols(), 3 * 32 + 12);
    render::line_chart_png(dir / "l.png", {"t", "x", "y"}, {{"a", {0, 1, 2}, {0.2, 0.5, 0.4}}});
    render::bar_chart_png(dir / "b.png", {"t", "x", "y", 0, 1}, {"1", "2"}, {0.5, 1.0}, {"1/2", "3/3"});
    EXPECT_TRUE(fs::exists(dir / "l.png"));
    EXPECT_TRUE(fs::exists(dir / "b.png"));
    EXPECT_THROW(render::bar_chart_png(dir / "c.png", {}, {"1"}, {}), UsageError);
}
