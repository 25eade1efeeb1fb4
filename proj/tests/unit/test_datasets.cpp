#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sfmg/datasets.hpp"

using namespace sfmg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("sfmg_test_datasets_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SyntheticConfig small_config(int runs) {
    SyntheticConfig c;
    c.runs = runs;
    c.duration_s = 30.0;
    return c;
}

}  // namespace

TEST_CASE("one synthetic run has 2-10 agents and at most 301 samples each") {
    const SyntheticConfig cfg = small_config(1);
    const auto data = generate_synthetic(cfg, SfmgParams{});
    REQUIRE(data.runs.size() == 1);
    const auto& run = data.runs[0];
    CHECK(run.trajectories.size() >= 2);
    CHECK(run.trajectories.size() <= 10);
    CHECK(run.dt == 0.1);
    CHECK(run.obstacles.size() == 4);
    for (const auto& tr : run.trajectories) {
        CHECK(tr.size() <= 301);
        CHECK(tr.first_step() == 0);
        // arrivals shorten a trajectory but never leave gaps
        CHECK(tr.last_step() == static_cast<int>(tr.size()) - 1);
        CHECK(run.destinations.count(tr.agent_id) == 1);
        const double goal_dist = distance(tr.samples[0].position, run.destinations.at(tr.agent_id));
        CHECK(goal_dist >= 7.0 - 1e-9);
        CHECK(goal_dist <= 10.0 + 1e-9);
    }
    CHECK(run.forces.size() == [&] {
        std::size_t n = 0;
        for (const auto& tr : run.trajectories) n += tr.size();
        return n;
    }());
}

TEST_CASE("identical seeds give byte-identical datasets") {
    const SyntheticConfig cfg = small_config(3);
    const fs::path a = scratch("det_a");
    const fs::path b = scratch("det_b");
    write_synthetic(a, generate_synthetic(cfg, SfmgParams{}), cfg);
    write_synthetic(b, generate_synthetic(cfg, SfmgParams{}), cfg);
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), a);
        CHECK(slurp(entry.path()) == slurp(b / rel));
    }
    SyntheticConfig other = cfg;
    other.seed = 43;
    const auto c = generate_synthetic(other, SfmgParams{});
    const auto d = generate_synthetic(cfg, SfmgParams{});
    CHECK_FALSE(c.runs[0].trajectories == d.runs[0].trajectories);
}

TEST_CASE("pedestrian counts are uniform on 2..10 (chi-square, 95%)") {
    const SyntheticConfig cfg = small_config(1000);
    std::map<int, int> hist;
    for (int r = 0; r < cfg.runs; ++r) ++hist[static_cast<int>(make_scenario(cfg, r).agents.size())];
    CHECK(hist.begin()->first >= 2);
    CHECK(hist.rbegin()->first <= 10);
    const double expected = cfg.runs / 9.0;
    double chi2 = 0.0;
    for (int k = 2; k <= 10; ++k) {
        const double o = hist.count(k) ? hist.at(k) : 0;
        chi2 += (o - expected) * (o - expected) / expected;
    }
    // 95% quantile of chi-square with 8 degrees of freedom
    CHECK(chi2 < 15.507);
}

TEST_CASE("group sizes and membership") {
    SyntheticConfig cfg = small_config(200);
    cfg.group_prob = 1.0;
    int with_group = 0;
    for (int r = 0; r < cfg.runs; ++r) {
        const Scene s = make_scenario(cfg, r);
        CHECK_NOTHROW(s.validate());
        for (const auto& g : s.groups) {
            CHECK(g.member_ids.size() >= 2);
            CHECK(g.member_ids.size() <= 4);
        }
        if (!s.groups.empty()) ++with_group;
    }
    CHECK(with_group == cfg.runs);
}

TEST_CASE("sample split 50/25/25") {
    SplitSpec spec;
    const auto idx = split_indices(100, spec);
    CHECK(idx.train.size() == 50);
    CHECK(idx.dev.size() == 25);
    CHECK(idx.test.size() == 25);
    std::set<std::size_t> all;
    for (auto v : {idx.train, idx.dev, idx.test}) all.insert(v.begin(), v.end());
    CHECK(all.size() == 100);
    CHECK(*all.rbegin() == 99);
    const auto again = split_indices(100, spec);
    CHECK(again.train == idx.train);
    CHECK(again.test == idx.test);
    spec.seed = 8;
    CHECK_FALSE(split_indices(100, spec).train == idx.train);
    SplitSpec bad;
    bad.train = 0.6;
    CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("four-row benchmark file") {
    const fs::path dir = scratch("four");
    write_text(dir / "t.txt", "# comment\n0 1 0.0 0.0\n0 2 1.0 1.0\n10, 1, 0.5, 0.0\n10\t2\t1.5\t1.0\n");
    const AnnotatedDataset d = load_trajectories(dir / "t.txt");
    REQUIRE(d.trajectories.size() == 2);
    CHECK(d.trajectories[0].size() == 2);
    CHECK(d.trajectories[1].size() == 2);
    CHECK(d.trajectories[0].samples[1].step == 1);
    CHECK(d.trajectories[1].samples[1].position == Vec2{1.5, 1.0});
    CHECK(d.dt == 0.4);

    LoadOptions o;
    o.frame_rate = 25.0;
    CHECK(load_trajectories(dir / "t.txt", o).dt == doctest::Approx(0.4));
    o.frame_rate = 50.0;
    CHECK(load_trajectories(dir / "t.txt", o).dt == doctest::Approx(0.2));
}

TEST_CASE("loader errors carry line numbers") {
    const fs::path dir = scratch("errors");
    write_text(dir / "bad.txt", "0 1 0 0\n0 2 x 1\n");
    try {
        load_trajectories(dir / "bad.txt");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
    write_text(dir / "short.txt", "0 1 0\n");
    CHECK_THROWS_AS(load_trajectories(dir / "short.txt"), DataError);
    write_text(dir / "ok.txt", "0 1 0 0\n0 2 1 1\n");
    write_text(dir / "groups.txt", "1 3\n");
    LoadOptions o;
    o.groups_path = dir / "groups.txt";
    CHECK_THROWS_AS(load_trajectories(dir / "ok.txt", o), DataError);
    CHECK_THROWS_AS(load_trajectories(dir / "missing.txt"), DataError);
}

TEST_CASE("groups file pairs pedestrians 84/85 and 88/89") {
    const fs::path dir = scratch("groups");
    write_text(dir / "groups.txt", "84 85\n88 89");
    std::string rows;
    for (int f = 0; f < 3; ++f) {
        for (int id : {84, 85, 88, 89}) rows += std::to_string(f * 10) + " " + std::to_string(id) + " " + std::to_string(id) + " 0\n";
    }
    write_text(dir / "t.txt", rows);
    LoadOptions o;
    o.groups_path = dir / "groups.txt";
    const AnnotatedDataset d = load_trajectories(dir / "t.txt", o);
    REQUIRE(d.groups.size() == 2);
    CHECK(d.groups[0].member_ids == std::vector<AgentId>{84, 85});
    CHECK(d.groups[1].member_ids == std::vector<AgentId>{88, 89});
    REQUIRE(d.group_of(85) != nullptr);
    CHECK(d.group_of(85)->contains(84));
    CHECK_FALSE(d.group_of(85)->contains(88));
}

TEST_CASE("write then read reproduces the dataset") {
    const auto data = generate_synthetic(small_config(2), SfmgParams{});
    const fs::path dir = scratch("roundtrip");
    for (const auto& run : data.runs) {
        write_dataset_dir(dir / run.name, run);
        const AnnotatedDataset back = read_dataset_dir(dir / run.name);
        CHECK(back.dt == run.dt);
        CHECK(back.trajectories == run.trajectories);
        CHECK(back.groups == run.groups);
        CHECK(back.destinations == run.destinations);
        REQUIRE(back.obstacles.size() == run.obstacles.size());
        for (std::size_t i = 0; i < run.obstacles.size(); ++i) CHECK(back.obstacles[i].polyline == run.obstacles[i].polyline);
        REQUIRE(back.forces.size() == run.forces.size());
        for (std::size_t i = 0; i < run.forces.size(); ++i) {
            CHECK(back.forces[i].forces.total == run.forces[i].forces.total);
            CHECK(back.forces[i].velocity == run.forces[i].velocity);
        }
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("stored force targets match a fresh evaluation of the stored scene") {
    const SfmgParams prm;
    const auto data = generate_synthetic(small_config(3), prm);
    double worst = 0.0;
    std::size_t checked = 0;
    for (const auto& run : data.runs) {
        std::set<int> steps;
        for (const auto& rec : run.forces) steps.insert(rec.step);
        for (int t : steps) {
            if (t % 7 != 0) continue;
            const Scene scene = run.scene_at(t);
            for (const auto& rec : run.forces) {
                if (rec.step != t) continue;
                const ForceBreakdown f = total_force(rec.agent_id, scene, prm, 0);
                worst = std::max({worst, distance(f.total, rec.forces.total),
                                  distance(f.pedestrians, rec.forces.pedestrians),
                                  distance(f.group, rec.forces.group), distance(f.obstacle, rec.forces.obstacle)});
                ++checked;
            }
        }
    }
    CHECK(checked > 100);
    CHECK(worst < 1e-9);
}
