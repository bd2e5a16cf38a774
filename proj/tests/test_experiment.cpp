#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "recpoison/error.hpp"
#include "recpoison/experiment.hpp"
#include "recpoison/synthetic.hpp"

using namespace recpoison;
namespace fs = std::filesystem;

namespace {

InteractionDataset small_synthetic() {
    SyntheticSpec spec;
    spec.n_users = 60;
    spec.n_items = 80;
    spec.mean_interactions = 10;
    return split_dataset(generate_synthetic(spec), {}, 7);
}

ExperimentGrid quick_grid() {
    ExperimentGrid g;
    ModelConfig m;
    m.dim = 8;
    m.epochs = 2;
    m.lr = 0.01;
    g.models = {m};
    g.attacks = {"NoneAttack", "Random"};
    g.seeds = 2;
    g.k = 10;
    g.n_targets = 3;
    g.attack_config.rounds = 1;
    g.attack_config.inner_epochs = 1;
    g.attack_config.outer_steps = 1;
    return g;
}

std::string key(const ReportRow& r) {
    std::ostringstream s;
    s.precision(17);
    s << r.dataset << '|' << r.model << '|' << r.attack << '|' << r.seed << '|' << r.attack_size << '|' << r.alpha << '|'
      << r.hr_at_k << '|' << r.ndcg_at_k << '|' << r.recall_at_k;
    return s.str();
}

std::vector<std::string> keys(const std::vector<ReportRow>& rows) {
    std::vector<std::string> k;
    for (const auto& r : rows) k.push_back(key(r));
    std::sort(k.begin(), k.end());
    return k;
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("recpoison_test_exp_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("attack tags") {
    CHECK(parse_attack_kind("NoneAttack") == AttackKind::None);
    CHECK(parse_attack_kind("CLeaR_D+R") == AttackKind::Clear);
    CHECK(parse_attack_kind("CLeaR_D") == AttackKind::ClearD);
    CHECK(parse_attack_kind("CLeaR_R") == AttackKind::ClearR);
    CHECK(to_string(AttackKind::Bandwagon) == "Bandwagon");
    CHECK_THROWS_AS(parse_attack_kind("Foo"), InputError);
}

TEST_CASE("ablation switches") {
    ExperimentCell c;
    c.attack = AttackKind::ClearD;
    c.seed = 9;
    CHECK(effective_attack_config(c).alpha == 0.0);
    CHECK(effective_attack_config(c).seed == 9);
    c.attack = AttackKind::ClearR;
    CHECK(!effective_attack_config(c).use_dispersion);
    CHECK(inner_model(c).seed == 9);
    ModelConfig s;
    s.cl = ClKind::SGL;
    c.surrogate = s;
    CHECK(inner_model(c).cl == ClKind::SGL);
    CHECK(inner_model(c).seed != 9);
    CHECK(c.attack_tag().find('@') != std::string::npos);
}

TEST_CASE("grid cardinality") {
    auto g = quick_grid();
    g.attacks = {"CLeaR"};
    g.attack_sizes = {0.01, 0.02, 0.03, 0.04, 0.05};
    CHECK(g.cells().size() == 5 * 2);
    g.attack_sizes = {0.01};
    g.alphas = {0, 0.01, 0.1, 0.5, 1, 5, 10};
    auto cells = g.cells();
    CHECK(cells.size() == 7 * 2);
    CHECK(cells[0].seed == 1);
    CHECK(cells[1].seed == 2);
    CHECK(cells[2].attack_config.alpha == 0.01);
    g.models.clear();
    CHECK_THROWS_AS(g.cells(), InputError);
}

TEST_CASE("one cell gives one row and one aggregate") {
    auto ds = small_synthetic();
    auto g = quick_grid();
    g.attacks = {"Random"};
    g.seeds = 1;
    auto r = run_experiment(ds, g);
    CHECK(r.rows.size() == 1);
    CHECK(r.aggregates.size() == 1);
    CHECK(r.rows[0].seed == "1");
    CHECK(r.aggregates[0].seed == "mean");
    CHECK(r.aggregates[0].hr_at_k == r.rows[0].hr_at_k);
}

TEST_CASE("grid run, aggregates, cache and workers") {
    auto ds = small_synthetic();
    auto g = quick_grid();
    g.attacks = {"NoneAttack", "Random", "Bandwagon", "CLeaR"};
    const auto dir = scratch("cache");
    auto a = run_experiment(ds, g, {dir, 1});
    REQUIRE(a.failures.empty());
    CHECK(a.rows.size() == 8);
    CHECK(a.aggregates.size() == 4);
    for (const auto& agg : a.aggregates) {
        double sum = 0.0;
        int n = 0;
        for (const auto& r : a.rows)
            if (r.attack == agg.attack) {
                sum += r.hr_at_k;
                ++n;
            }
        CHECK(std::abs(agg.hr_at_k - sum / n) < 1e-12);
    }
    for (const auto& r : a.rows) {
        CHECK((r.hr_at_k >= 0.0 && r.hr_at_k <= 1.0));
        CHECK((r.ndcg_at_k >= 0.0 && r.ndcg_at_k <= 1.0));
        CHECK((r.recall_at_k >= 0.0 && r.recall_at_k <= 1.0));
    }
    std::size_t cached = 0;
    for (const auto& e : fs::directory_iterator(dir)) cached += e.path().extension() == ".json";
    CHECK(cached == 8);
    auto b = run_experiment(ds, g, {dir, 1});
    CHECK(report_csv(b) == report_csv(a));
    auto c = run_experiment(ds, g, {std::nullopt, 3});
    CHECK(report_csv(c) == report_csv(a));
}

TEST_CASE("failed cells are recorded and the grid continues") {
    auto ds = small_synthetic();
    auto g = quick_grid();
    g.n_targets = 1000;  // more than the cold pool
    g.attacks = {"Random"};
    auto r = run_experiment(ds, g);
    CHECK(r.rows.empty());
    CHECK(r.failures.size() == 2);
    CHECK(r.failures[0].error.find("targets") != std::string::npos);
}

TEST_CASE("cell keys") {
    auto ds = small_synthetic();
    ExperimentCell a;
    ExperimentCell b = a;
    CHECK(cell_key(ds, a) == cell_key(ds, b));
    b.seed = 2;
    CHECK(cell_key(ds, a) != cell_key(ds, b));
    auto other = ds;
    other.train.pop_back();
    other.recompute_popularity();
    CHECK(cell_key(other, a) != cell_key(ds, a));
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("report emission") {
    AttackReport empty;
    CHECK(report_csv(empty) == "dataset,model,attack,seed,attack_size,alpha,hr_at_k,ndcg_at_k,recall_at_k\n");

    AttackReport r;
    r.rows.push_back({"desk", "SimGCL", "CLeaR", "1", 0.01, 0.5, 0.1, 0.05, 0.3});
    r.rows.push_back({"desk", "SimGCL", "CLeaR", "2", 0.01, 0.5, 0.2, 0.07, 0.4});
    r.rows.push_back({"desk", "LightGCN", "Random", "1", 0.02, 0.5, 1.0 / 3.0, 0.0, 0.25});
    r.failures.push_back({"desk", "SGL", "CLeaR", 3, "boom"});
    aggregate(r);
    REQUIRE(r.aggregates.size() == 2);
    CHECK(r.aggregates[0].hr_at_k == doctest::Approx(0.15).epsilon(1e-14));

    auto back = report_from_json(report_to_json(r));
    CHECK(keys(back.rows) == keys(r.rows));
    CHECK(keys(back.aggregates) == keys(r.aggregates));
    REQUIRE(back.failures.size() == 1);
    CHECK(back.failures[0].error == "boom");

    const auto dir = scratch("emit");
    fs::create_directories(dir);
    emit_report(r, dir, "rep");
    CHECK(fs::exists(dir / "rep.csv"));
    CHECK(fs::exists(dir / "rep.json"));
    std::ifstream in(dir / "rep_long.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header.find("metric") != std::string::npos);
    std::size_t lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    CHECK(lines == 3 * r.rows.size());
    CHECK_THROWS_AS(emit_report(r, "/proc/definitely/not/here", "x"), InputError);
}
