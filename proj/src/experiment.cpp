#include "recpoison/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "recpoison/error.hpp"

namespace recpoison {

using nlohmann::json;

AttackKind parse_attack_kind(const std::string& tag) {
    if (tag == "NoneAttack" || tag == "none") return AttackKind::None;
    if (tag == "Random" || tag == "random") return AttackKind::Random;
    if (tag == "Bandwagon" || tag == "bandwagon") return AttackKind::Bandwagon;
    if (tag == "CLeaR" || tag == "CLeaR_D+R" || tag == "clear") return AttackKind::Clear;
    if (tag == "CLeaR_D") return AttackKind::ClearD;
    if (tag == "CLeaR_R") return AttackKind::ClearR;
    throw InputError("unknown attack '" + tag + "' (expected NoneAttack, Random, Bandwagon, CLeaR, CLeaR_D, CLeaR_R)");
}

std::string to_string(AttackKind k) {
    switch (k) {
        case AttackKind::None: return "NoneAttack";
        case AttackKind::Random: return "Random";
        case AttackKind::Bandwagon: return "Bandwagon";
        case AttackKind::Clear: return "CLeaR";
        case AttackKind::ClearD: return "CLeaR_D";
        case AttackKind::ClearR: return "CLeaR_R";
    }
    return "NoneAttack";
}

bool is_clear(AttackKind k) { return k == AttackKind::Clear || k == AttackKind::ClearD || k == AttackKind::ClearR; }

std::string ExperimentCell::attack_tag() const {
    auto t = to_string(attack);
    if (surrogate && is_clear(attack)) t += "@" + surrogate->tag();
    return t;
}

json to_json(const ExperimentCell& c) {
    json j{{"dataset", c.dataset},
           {"victim", to_json(c.victim)},
           {"attack", to_string(c.attack)},
           {"attack_size", c.attack_size},
           {"attack_config", to_json(c.attack_config)},
           {"n_targets", c.n_targets},
           {"popular_fraction", c.popular_fraction},
           {"k", c.k},
           {"seed", c.seed}};
    if (c.surrogate) j["surrogate"] = to_json(*c.surrogate);
    return j;
}

AttackConfig effective_attack_config(const ExperimentCell& cell) {
    AttackConfig ac = cell.attack_config;
    ac.seed = cell.seed;
    ac.k = cell.k;
    if (cell.attack == AttackKind::ClearD) ac.alpha = 0.0;
    if (cell.attack == AttackKind::ClearR) ac.use_dispersion = false;
    return ac;
}

ModelConfig inner_model(const ExperimentCell& cell) {
    ModelConfig inner = cell.surrogate ? *cell.surrogate : cell.victim;
    // A surrogate is trained independently of the victim.
    inner.seed = cell.surrogate ? mix64(cell.seed ^ 0x5a77) : cell.seed;
    return inner;
}

MaliciousProfile build_attack(const InteractionDataset& ds, const ExperimentCell& cell, const AttackBudget& budget) {
    switch (cell.attack) {
        case AttackKind::None: {
            MaliciousProfile p;
            p.budget = budget;
            p.budget.n_malicious = 0;
            return p;
        }
        case AttackKind::Random: return random_attack(budget, ds, cell.seed);
        case AttackKind::Bandwagon: return bandwagon_attack(budget, ds, cell.popular_fraction, cell.seed);
        case AttackKind::Clear:
        case AttackKind::ClearD:
        case AttackKind::ClearR: return clear_attack(ds, inner_model(cell), effective_attack_config(cell), budget).profile;
    }
    throw InputError("unknown attack kind");
}

ReportRow run_cell(const InteractionDataset& ds, const ExperimentCell& cell) {
    const auto targets = select_target_items(ds, cell.n_targets, cell.seed);
    const auto budget = attack_budget(ds, cell.attack_size, targets);
    const MaliciousProfile profile = build_attack(ds, cell, budget);

    ModelConfig victim = cell.victim;
    victim.seed = cell.seed;
    const MaliciousProfiles* mal = profile.discretized.empty() ? nullptr : &profile.discretized;
    const ModelState state = train(ds, victim, mal);
    const EvalMetrics m = evaluate_model(state, ds, mal, budget.target_items, cell.k);

    ReportRow r;
    r.dataset = cell.dataset;
    r.model = cell.victim.tag();
    r.attack = cell.attack_tag();
    r.seed = std::to_string(cell.seed);
    r.attack_size = cell.attack_size;
    r.alpha = cell.attack_config.alpha;
    if (cell.attack == AttackKind::ClearD) r.alpha = 0.0;
    r.hr_at_k = m.hr;
    r.ndcg_at_k = m.ndcg;
    r.recall_at_k = m.recall;
    return r;
}

std::vector<ExperimentCell> ExperimentGrid::cells() const {
    if (models.empty() || attacks.empty() || attack_sizes.empty() || seeds == 0)
        throw InputError("experiment grid is empty");
    const std::vector<double> alpha_axis = alphas.empty() ? std::vector<double>{attack_config.alpha} : alphas;
    std::vector<ExperimentCell> out;
    for (const auto& model : models)
        for (const auto& tag : attacks)
            for (double size : attack_sizes)
                for (double alpha : alpha_axis)
                    for (std::size_t s = 0; s < seeds; ++s) {
                        ExperimentCell c;
                        c.dataset = dataset;
                        c.victim = model;
                        c.attack = parse_attack_kind(tag);
                        c.attack_size = size;
                        c.attack_config = attack_config;
                        c.attack_config.alpha = alpha;
                        c.surrogate = surrogate;
                        c.n_targets = n_targets;
                        c.popular_fraction = popular_fraction;
                        c.k = k;
                        c.seed = base_seed + s;
                        out.push_back(std::move(c));
                    }
    return out;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string cell_key(const InteractionDataset& ds, const ExperimentCell& cell) {
    std::ostringstream data;
    data << ds.n_users() << ' ' << ds.n_items();
    for (const auto* split : {&ds.train, &ds.valid, &ds.test}) {
        data << '|';
        for (const auto& x : *split) data << x.user << ',' << x.item << ';';
    }
    json j = to_json(cell);
    j["dataset_hash"] = fnv1a(data.str());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

namespace {

json row_json(const ReportRow& r) {
    return json{{"dataset", r.dataset},       {"model", r.model},         {"attack", r.attack},
                {"seed", r.seed},             {"attack_size", r.attack_size}, {"alpha", r.alpha},
                {"hr_at_k", r.hr_at_k},       {"ndcg_at_k", r.ndcg_at_k}, {"recall_at_k", r.recall_at_k}};
}

ReportRow row_from_json(const json& j) {
    ReportRow r;
    r.dataset = j.at("dataset").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.attack = j.at("attack").get<std::string>();
    r.seed = j.at("seed").get<std::string>();
    r.attack_size = j.at("attack_size").get<double>();
    r.alpha = j.at("alpha").get<double>();
    r.hr_at_k = j.at("hr_at_k").get<double>();
    r.ndcg_at_k = j.at("ndcg_at_k").get<double>();
    r.recall_at_k = j.at("recall_at_k").get<double>();
    return r;
}

std::optional<ReportRow> read_cached(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) return std::nullopt;
    try {
        return row_from_json(json::parse(in));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write " + p.string());
    out << text;
    if (!out) throw InputError("failed writing " + p.string());
}

}  // namespace

void aggregate(AttackReport& report) {
    report.aggregates.clear();
    std::vector<std::pair<ReportRow, std::size_t>> groups;
    for (const auto& r : report.rows) {
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) {
            const auto& a = g.first;
            return a.dataset == r.dataset && a.model == r.model && a.attack == r.attack &&
                   a.attack_size == r.attack_size && a.alpha == r.alpha;
        });
        if (it == groups.end()) {
            ReportRow a = r;
            a.seed = "mean";
            a.hr_at_k = a.ndcg_at_k = a.recall_at_k = 0.0;
            groups.emplace_back(a, 0);
            it = groups.end() - 1;
        }
        it->first.hr_at_k += r.hr_at_k;
        it->first.ndcg_at_k += r.ndcg_at_k;
        it->first.recall_at_k += r.recall_at_k;
        ++it->second;
    }
    for (auto& [row, n] : groups) {
        const double inv = 1.0 / static_cast<double>(n);
        row.hr_at_k *= inv;
        row.ndcg_at_k *= inv;
        row.recall_at_k *= inv;
        report.aggregates.push_back(row);
    }
}

AttackReport run_experiment(const InteractionDataset& ds, const ExperimentGrid& grid, const RunOptions& options) {
    const auto cells = grid.cells();
    if (options.cache_dir) std::filesystem::create_directories(*options.cache_dir);
    std::vector<std::optional<ReportRow>> rows(cells.size());
    std::vector<std::optional<FailedCell>> failed(cells.size());
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t c; (c = next.fetch_add(1)) < cells.size();) {
            const auto& cell = cells[c];
            std::filesystem::path cached;
            if (options.cache_dir) {
                cached = *options.cache_dir / (cell_key(ds, cell) + ".json");
                if (auto hit = read_cached(cached)) {
                    rows[c] = *hit;
                    continue;
                }
            }
            try {
                rows[c] = run_cell(ds, cell);
                if (options.cache_dir) write_text(cached, row_json(*rows[c]).dump() + "\n");
            } catch (const std::exception& e) {
                failed[c] = FailedCell{cell.dataset, cell.victim.tag(), cell.attack_tag(), cell.seed, e.what()};
            }
        }
    };
    const std::size_t n_workers = std::max<std::size_t>(1, std::min(options.workers, cells.size()));
    if (n_workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(work);
    }

    AttackReport report;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (rows[c]) report.rows.push_back(*rows[c]);
        if (failed[c]) report.failures.push_back(*failed[c]);
    }
    aggregate(report);
    return report;
}

json report_to_json(const AttackReport& report) {
    json nested = json::object();
    for (const auto& r : report.rows) nested[r.dataset][r.model][r.attack]["rows"].push_back(row_json(r));
    for (const auto& r : report.aggregates) nested[r.dataset][r.model][r.attack]["mean"].push_back(row_json(r));
    json failures = json::array();
    for (const auto& f : report.failures)
        failures.push_back({{"dataset", f.dataset}, {"model", f.model}, {"attack", f.attack}, {"seed", f.seed},
                            {"error", f.error}});
    return json{{"report", nested}, {"failures", failures}};
}

AttackReport report_from_json(const json& j) {
    AttackReport report;
    try {
        for (const auto& [dataset, models] : j.at("report").items())
            for (const auto& [model, attacks] : models.items())
                for (const auto& [attack, block] : attacks.items()) {
                    if (block.contains("rows"))
                        for (const auto& r : block["rows"]) report.rows.push_back(row_from_json(r));
                    if (block.contains("mean"))
                        for (const auto& r : block["mean"]) report.aggregates.push_back(row_from_json(r));
                }
        if (j.contains("failures"))
            for (const auto& f : j["failures"])
                report.failures.push_back({f.at("dataset").get<std::string>(), f.at("model").get<std::string>(),
                                           f.at("attack").get<std::string>(), f.at("seed").get<std::uint64_t>(),
                                           f.at("error").get<std::string>()});
    } catch (const json::exception& e) {
        throw InputError(std::string("report JSON: ") + e.what());
    }
    return report;
}

std::string report_csv(const AttackReport& report) {
    std::string out = "dataset,model,attack,seed,attack_size,alpha,hr_at_k,ndcg_at_k,recall_at_k\n";
    for (const auto* rows : {&report.rows, &report.aggregates})
        for (const auto& r : *rows)
            out += r.dataset + "," + r.model + "," + r.attack + "," + r.seed + "," + num(r.attack_size) + "," +
                   num(r.alpha) + "," + num(r.hr_at_k) + "," + num(r.ndcg_at_k) + "," + num(r.recall_at_k) + "\n";
    return out;
}

std::string report_long_csv(const AttackReport& report) {
    std::string out = "dataset,model,attack,seed,attack_size,alpha,metric,value\n";
    for (const auto& r : report.rows) {
        const std::string head = r.dataset + "," + r.model + "," + r.attack + "," + r.seed + "," + num(r.attack_size) +
                                 "," + num(r.alpha) + ",";
        out += head + "hr_at_k," + num(r.hr_at_k) + "\n";
        out += head + "ndcg_at_k," + num(r.ndcg_at_k) + "\n";
        out += head + "recall_at_k," + num(r.recall_at_k) + "\n";
    }
    return out;
}

void emit_report(const AttackReport& report, const std::filesystem::path& dir, const std::string& stem) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw InputError("cannot create " + dir.string() + ": " + ec.message());
    write_text(dir / (stem + ".csv"), report_csv(report));
    write_text(dir / (stem + ".json"), report_to_json(report).dump(2) + "\n");
    write_text(dir / (stem + "_long.csv"), report_long_csv(report));
}

}  // namespace recpoison
