#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "recpoison/cli.hpp"
#include "recpoison/config.hpp"
#include "recpoison/error.hpp"

using namespace recpoison;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "recpoison");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("recpoison_test_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string l; std::getline(in, l);) ++n;
    return n;
}

// Tiny settings so every command finishes in a second or two.
const std::vector<std::string> kQuick{"--set", "model.epochs=3",       "--set", "model.dim=8",
                                      "--set", "attack.rounds=2",      "--set", "attack.inner_epochs=1",
                                      "--set", "attack.outer_steps=2", "--set", "eval.seeds=2"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail = kQuick) {
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
}

}  // namespace

TEST_CASE("config defaults and validation") {
    const RunConfig c = default_run_config();
    CHECK_NOTHROW(c.validate());
    CHECK(c.dataset.path == "synthetic");
    CHECK(c.eval.k == 50);
    CHECK(c.eval.seeds == 10);
    CHECK(c.attack.params.rounds == 5);
    CHECK(c.attack.params.outer_steps == 50);
    CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"bogus", 1}}), InputError);
    CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"attack", {{"bogus", 1}}}}), InputError);
    CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"eval", {{"k", 0}}}}), InputError);
    CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"attack", {{"mode", "blackbox"}}}}), InputError);
    CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"model", {{"dim", "x"}}}}), InputError);
}

TEST_CASE("config round trip") {
    nlohmann::json j = {{"model", {{"cl", "sgl"}, {"dim", 16}}},
                        {"attack", {{"kind", "Random"}, {"alpha", 5.0}, {"mode", "blackbox"}, {"surrogate", {{"cl", "simgcl"}}}}},
                        {"eval", {{"models", {{{"cl", "none"}}, {{"cl", "xsimgcl"}}}}, {"sweep", {{"axis", "alpha"}, {"values", {0, 1}}}}}}};
    const RunConfig c = run_config_from_json(j);
    CHECK(c.model.cl == ClKind::SGL);
    CHECK(c.eval.models.size() == 2);
    CHECK(c.eval.models[1].dim == 16);  // inherits the model section
    const RunConfig back = run_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    auto g = make_grid(c);
    CHECK(g.surrogate.has_value());
    CHECK(g.alphas == std::vector<double>{0, 1});
    CHECK(g.cells().size() == 2 * 2 * c.eval.seeds);
}

TEST_CASE("ingest") {
    const auto dir = scratch("ingest");
    {
        std::ofstream raw(dir / "raw.txt");
        for (int u = 0; u < 10; ++u)
            for (int i = 0; i < 6; ++i) raw << "user" << u << '\t' << "item" << (u + i) % 9 << '\n';
    }
    CHECK(run({"ingest", (dir / "raw.txt").string(), "-o", (dir / "a").string()}) == 0);
    CHECK(run({"ingest", (dir / "raw.txt").string(), "-o", (dir / "b").string()}) == 0);
    for (const char* f : {"mapping.json", "train.csv", "valid.csv", "test.csv"}) {
        CHECK(fs::exists(dir / "a" / f));
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    CHECK(run({"ingest", (dir / "missing.txt").string(), "-o", (dir / "c").string()}) == 2);
    CHECK(run({"ingest", "--synthetic", "-o", (dir / "syn").string()}) == 0);
    CHECK(run({"ingest"}) == 2);
    CHECK(run({"frobnicate"}) == 2);
}

TEST_CASE("train, resume and config errors") {
    const auto dir = scratch("train");
    CHECK(run(with({"train", "-o", (dir / "full").string()})) == 0);
    CHECK(fs::exists(dir / "full" / "checkpoint.json"));
    CHECK(line_count(dir / "full" / "loss_curve.csv") == 4);
    CHECK(fs::exists(dir / "full" / "resolved_config.json"));

    CHECK(run(with({"train", "-o", (dir / "part").string(), "--set", "model.epochs=1"},
                   {"--set", "model.dim=8"})) == 0);
    CHECK(run(with({"train", "-o", (dir / "part").string(), "--resume", (dir / "part" / "checkpoint.json").string()})) == 0);
    CHECK(slurp(dir / "full" / "checkpoint.json") == slurp(dir / "part" / "checkpoint.json"));
    CHECK(slurp(dir / "full" / "loss_curve.csv") == slurp(dir / "part" / "loss_curve.csv"));

    // re-running from the resolved config reproduces the checkpoint
    CHECK(run({"train", "-c", (dir / "full" / "resolved_config.json").string(), "-o", (dir / "again").string()}) == 0);
    CHECK(slurp(dir / "full" / "checkpoint.json") == slurp(dir / "again" / "checkpoint.json"));

    CHECK(run(with({"train", "-o", (dir / "x").string(), "--set", "model.omega=0"})) == 0);
    CHECK(nlohmann::json::parse(slurp(dir / "x" / "checkpoint.json"))["contrastive"] == false);

    CHECK(run({"train", "--set", "model.bogus=1", "-o", (dir / "bad").string()}) == 2);
    CHECK(run({"train", "-c", (dir / "nope.json").string()}) == 2);
}

TEST_CASE("attack, spectra, eval, sweep and report") {
    const auto dir = scratch("flow");
    setenv("RECPOISON_OUT", dir.string().c_str(), 1);

    CHECK(run(with({"attack", "--kind", "Random", "--set", "output=\"rnd\""})) == 0);
    CHECK(fs::exists(dir / "rnd" / "profile.json"));
    CHECK(!fs::exists(dir / "rnd" / "trace.csv"));

    CHECK(run(with({"attack", "--set", "output=\"clr\""})) == 0);
    CHECK(line_count(dir / "clr" / "trace.csv") == 3);
    CHECK(run(with({"attack", "--set", "output=\"clr2\""})) == 0);
    CHECK(slurp(dir / "clr" / "profile.json") == slurp(dir / "clr2" / "profile.json"));

    CHECK(run(with({"attack", "--set", "output=\"bb\"", "--set", "attack.mode=\"blackbox\"", "--set",
                    "attack.surrogate={\"cl\":\"sgl\",\"dim\":8}"})) == 0);
    CHECK(run(with({"attack", "--set", "attack.mode=\"blackbox\"", "--set", "output=\"bb2\""})) == 2);

    CHECK(run(with({"train", "--profile", (dir / "clr" / "profile.json").string(), "--set", "output=\"pois\""})) == 0);
    CHECK(run(with({"train", "--set", "output=\"lgn\"", "--set", "model.cl=\"none\""})) == 0);
    CHECK(run(with({"spectra", (dir / "lgn" / "checkpoint.json").string(), (dir / "pois" / "checkpoint.json").string(),
                    "--profile", "", "--profile", (dir / "clr" / "profile.json").string(), "--set", "output=\"sp\""})) == 0);
    CHECK(fs::exists(dir / "sp" / "spectrum_0_checkpoint.csv"));
    CHECK(line_count(dir / "sp" / "spectrum_1_checkpoint.csv") == 9);
    auto summary = nlohmann::json::parse(slurp(dir / "sp" / "spectra_summary.json"));
    CHECK(summary["comparisons"].size() == 1);
    // a poisoned checkpoint without its profile does not fit the dataset
    CHECK(run(with({"spectra", (dir / "pois" / "checkpoint.json").string(), "--set", "output=\"sp2\""})) == 2);

    CHECK(run(with({"eval", "--set", "output=\"ev\"", "--set", "eval.attacks=[\"NoneAttack\",\"Random\"]"})) == 0);
    CHECK(line_count(dir / "ev" / "report.csv") == 1 + 4 + 2);
    const std::string first = slurp(dir / "ev" / "report.csv");
    fs::remove_all(dir / "ev" / "cache");
    CHECK(run({"eval", "-c", (dir / "ev" / "resolved_config.json").string()}) == 0);
    CHECK(slurp(dir / "ev" / "report.csv") == first);

    CHECK(run(with({"sweep", "--axis", "attack_size", "--values", "0.01", "0.02", "0.03", "--set", "output=\"sw\"",
                    "--set", "eval.attacks=[\"Random\"]", "--workers", "2"})) == 0);
    CHECK(line_count(dir / "sw" / "sweep.csv") == 1 + 3 * 2 + 3);
    CHECK(run(with({"sweep", "--set", "output=\"sw2\""})) == 2);

    CHECK(run({"report", (dir / "ev" / "report.json").string(), (dir / "sw" / "sweep.json").string(), "-o",
               (dir / "merged").string()}) == 0);
    CHECK(line_count(dir / "merged" / "report.csv") == 1 + 4 + 6 + 4);
    unsetenv("RECPOISON_OUT");
}
