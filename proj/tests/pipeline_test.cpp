#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "rim/pipeline.hpp"

namespace rim::pipeline {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path tmp(const std::string& name)
{
    const auto d = fs::temp_directory_path() / ("rim_pipe_" + name);
    fs::remove_all(d);
    return d;
}

TEST(Generate, ByteIdenticalRecords)
{
    const auto sc = testkit::load("experiment1_noisy.yaml");
    RunOptions a, b;
    a.out_dir = tmp("det_a");
    b.out_dir = tmp("det_b");
    a.seed = b.seed = 4;
    run_generate(sc, a);
    run_generate(sc, b);
    const auto ra = slurp(a.out_dir / "map.records.json");
    ASSERT_FALSE(ra.empty());
    EXPECT_EQ(ra, slurp(b.out_dir / "map.records.json"));
    EXPECT_EQ(slurp(a.out_dir / "map.pgm"), slurp(b.out_dir / "map.pgm"));
    EXPECT_EQ(slurp(a.out_dir / "summary.json"), slurp(b.out_dir / "summary.json"));
}

TEST(Generate, Experiment1FindsAll)
{
    const auto sc = testkit::load("experiment1.yaml");
    RunOptions o;
    o.write_files = false;
    const auto g = run_generate(sc, o);
    EXPECT_EQ(g.summary.eval.found, 5);
    EXPECT_EQ(g.summary.eval.localized, 5);
    EXPECT_EQ(g.summary.regions, 1);
    EXPECT_TRUE(richmap::dedup_invariant_holds(g.map));
}

TEST(Generate, TwoPilesTwoRegions)
{
    const auto sc = testkit::load("two_piles.yaml");
    RunOptions o;
    o.write_files = false;
    const auto g = run_generate(sc, o);
    EXPECT_EQ(g.summary.regions, 2);
    EXPECT_EQ(g.summary.eval.found, 5);
}

TEST(Generate, EmptyFieldRegistersNothing)
{
    const auto sc = testkit::load("empty.yaml");
    RunOptions o;
    o.write_files = false;
    const auto g = run_generate(sc, o);
    EXPECT_EQ(g.summary.regions, 0);
    EXPECT_EQ(richmap::count(g.map), 0u);
    EXPECT_TRUE(g.summary.ok);
}

class UpdateFixture : public ::testing::Test
{
protected:
    static void SetUpTestSuite()
    {
        base_ = new fs::path(tmp("update_base"));
        RunOptions o;
        o.out_dir = *base_;
        run_generate(testkit::load("experiment1.yaml"), o);
    }
    static void TearDownTestSuite() { delete base_; }
    static fs::path* base_;
};
fs::path* UpdateFixture::base_ = nullptr;

TEST_F(UpdateFixture, TwoRemovedAreMarkedMissing)
{
    RunOptions o;
    o.out_dir = tmp("update_exp2");
    const auto u = run_update(testkit::load("experiment2.yaml"), *base_ / "map", o);
    EXPECT_EQ(u.report.verified.size(), 3u);
    EXPECT_EQ(u.report.deleted.size(), 2u);
    EXPECT_TRUE(u.report.added.empty());
    EXPECT_EQ(richmap::count(u.map), 3u);
    std::set<std::string> missing;
    for (const auto& r : u.map.records)
        if (r.status == richmap::Status::Missing) missing.insert(r.tag_id);
    EXPECT_EQ(missing, (std::set<std::string>{"UF6-004", "UF6-005"}));
    // The render carries both colours.
    const auto img = richmap::read_ppm(o.out_dir / "map.ppm");
    std::size_t green = 0, red = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            green += img.at(x, y) == richmap::kGreen;
            red += img.at(x, y) == richmap::kRed;
        }
    EXPECT_GT(green, 0u);
    EXPECT_GT(red, 0u);
}

TEST_F(UpdateFixture, UnchangedWorldVerifiesAll)
{
    RunOptions o;
    o.write_files = false;
    const auto u = run_update(testkit::load("experiment1.yaml"), *base_ / "map", o);
    EXPECT_EQ(u.report.verified.size(), 5u);
    EXPECT_TRUE(u.report.deleted.empty());
    EXPECT_TRUE(u.report.added.empty());
}

TEST_F(UpdateFixture, AddedCylinderRegistered)
{
    RunOptions o;
    o.write_files = false;
    const auto u = run_update(testkit::load("added_cylinder.yaml"), *base_ / "map", o);
    EXPECT_EQ(u.report.added.size(), 1u);
    EXPECT_EQ(richmap::count(u.map), 6u);
    bool found = false;
    for (const auto& r : u.map.records) found |= r.status == richmap::Status::New && r.tag_id == "UF6-006";
    EXPECT_TRUE(found);
}

TEST(Batch, RowsAndTable)
{
    const auto sc = testkit::load("experiment1.yaml");
    RunOptions o;
    o.out_dir = tmp("batch");
    const auto rows = run_batch(sc, 2, o);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].seed + 1, rows[1].seed);
    EXPECT_TRUE(fs::exists(o.out_dir / "table.csv"));
    const auto csv = slurp(o.out_dir / "table.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    EXPECT_NE(format_table(rows).find("Cylinders Found"), std::string::npos);
}

TEST(Update, MissingBundleIsStageError)
{
    RunOptions o;
    o.write_files = false;
    try {
        run_update(testkit::load("experiment1.yaml"), "/nonexistent/map", o);
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage, "load");
    }
}

}  // namespace
}  // namespace rim::pipeline
