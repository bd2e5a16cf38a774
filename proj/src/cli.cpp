#include "recpoison/cli.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "recpoison/attack.hpp"
#include "recpoison/config.hpp"
#include "recpoison/data.hpp"
#include "recpoison/error.hpp"
#include "recpoison/experiment.hpp"
#include "recpoison/metrics.hpp"
#include "recpoison/model.hpp"
#include "recpoison/spectral.hpp"
#include "recpoison/synthetic.hpp"

namespace recpoison {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Options shared by every config-driven subcommand.
struct CommonOptions {
    std::string config;
    std::vector<std::string> sets;
    std::string dataset;
    std::string out;
    std::size_t workers = 1;
};

void add_common(CLI::App* sub, CommonOptions& o) {
    sub->add_option("-c,--config", o.config, "JSON run config");
    sub->add_option("--set", o.sets, "override a config key, e.g. --set model.epochs=10 (value parsed as JSON)");
    sub->add_option("--dataset", o.dataset, "dataset path (overrides dataset.path)");
    sub->add_option("-o,--out", o.out, "output directory (default $RECPOISON_OUT/<output>)");
    sub->add_option("--workers", o.workers, "parallel workers")->check(CLI::PositiveNumber);
}

void apply_set(json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw InputError("--set expects key=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;
    }
    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw InputError("bad --set key '" + path + "'");
        if (!node->is_object()) *node = json::object();
        if (dot == std::string::npos) {
            (*node)[key] = value;
            break;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

RunConfig resolve_config(const CommonOptions& o) {
    json j = json::object();
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) throw InputError("cannot open config " + o.config);
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw InputError(o.config + ": " + e.what());
        }
    }
    for (const auto& s : o.sets) apply_set(j, s);
    if (!o.dataset.empty()) apply_set(j, "dataset.path=\"" + o.dataset + "\"");
    return run_config_from_json(j);
}

fs::path prepare_out(const RunConfig& c, const CommonOptions& o) {
    const fs::path dir = output_dir(c, o.out.empty() ? std::nullopt : std::optional<fs::path>(o.out));
    write_resolved_config(c, dir);
    return dir;
}

// Timestamps live only here so that every other output is reproducible.
void write_run_log(const fs::path& dir, const std::string& command) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    std::ofstream(dir / "run.log", std::ios::app) << buf << ' ' << command << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void print_stats(const std::string& name, const InteractionDataset& ds) {
    const DatasetStats s = dataset_stats(ds);
    std::printf("%-12s %8s %8s %14s %10s\n", "Dataset", "#Users", "#Items", "#Interactions", "Density");
    std::printf("%-12s %8zu %8zu %14zu %9.4f%%\n", name.c_str(), s.users, s.items, s.interactions, 100.0 * s.density);
    std::printf("split        train %zu / valid %zu / test %zu\n", ds.train.size(), ds.valid.size(), ds.test.size());
}

// --- ingest ---------------------------------------------------------------

struct IngestOptions {
    std::string raw;
    std::string out;
    bool synthetic = false;
    std::uint64_t split_seed = 7;
    std::uint64_t synthetic_seed = SyntheticSpec{}.seed;
};

int cmd_ingest(const IngestOptions& o) {
    if (o.raw.empty() == !o.synthetic) throw InputError("ingest needs exactly one of <raw file> or --synthetic");
    if (o.out.empty()) throw InputError("ingest needs --out");
    InteractionDataset raw;
    if (o.synthetic) {
        SyntheticSpec spec;
        spec.seed = o.synthetic_seed;
        raw = generate_synthetic(spec);
    } else {
        raw = load_interactions(o.raw);
    }
    const InteractionDataset ds = split_dataset(raw, {}, o.split_seed);
    save_dataset(ds, o.out);
    print_stats(o.synthetic ? "synthetic" : fs::path(o.raw).stem().string(), ds);
    return 0;
}

// --- train ----------------------------------------------------------------

struct TrainOptions {
    std::string resume;
    std::string profile;
};

MaliciousProfiles read_profile_sets(const std::string& path, std::size_t n_items) {
    return profile_from_json(read_json(path), n_items);
}

std::string loss_curve_csv(const std::vector<EpochStats>& log) {
    std::string s = "epoch,bpr,cl\n";
    for (const auto& e : log) s += std::to_string(e.epoch) + ',' + fmt(e.bpr) + ',' + fmt(e.cl) + '\n';
    return s;
}

int cmd_train(const CommonOptions& co, const TrainOptions& o) {
    const RunConfig c = resolve_config(co);
    const InteractionDataset ds = load_config_dataset(c.dataset);
    const fs::path dir = prepare_out(c, co);
    std::optional<MaliciousProfiles> mal;
    if (!o.profile.empty()) mal = read_profile_sets(o.profile, ds.n_items());
    const MaliciousProfiles* malp = mal ? &*mal : nullptr;

    std::vector<EpochStats> log;
    ModelState state;
    if (!o.resume.empty()) {
        state = load_checkpoint(o.resume);
        ModelConfig same = c.model;
        same.epochs = state.config.epochs;
        if (to_json(state.config) != to_json(same))
            throw InputError("checkpoint " + o.resume + " was trained with a different model config");
        if (state.epochs_done > c.model.epochs) throw InputError("checkpoint already has more epochs than configured");
        // Earlier epochs of the curve are kept when resuming into the same directory.
        const fs::path prev = dir / "loss_curve.csv";
        if (fs::exists(prev)) {
            std::ifstream in(prev);
            std::string line;
            std::getline(in, line);
            while (std::getline(in, line)) {
                EpochStats e;
                if (std::sscanf(line.c_str(), "%zu,%lf,%lf", &e.epoch, &e.bpr, &e.cl) == 3 && e.epoch < state.epochs_done)
                    log.push_back(e);
            }
        }
        state.config.epochs = c.model.epochs;
        continue_training(state, ds, malp, c.model.epochs - state.epochs_done, &log);
    } else {
        state = train(ds, c.model, malp, &log);
    }
    save_checkpoint(state, dir / "checkpoint.json");
    write_text(dir / "loss_curve.csv", loss_curve_csv(log));
    write_run_log(dir, "train");
    std::printf("trained %s (%s) for %zu epochs -> %s\n", c.model.tag().c_str(),
                c.model.contrastive() ? "contrastive" : "non-CL", state.epochs_done,
                (dir / "checkpoint.json").string().c_str());
    return 0;
}

// --- attack ---------------------------------------------------------------

std::string trace_csv(const std::vector<RoundTrace>& trace) {
    std::string s = "round,dispersion,rank,hr_at_k,steps,accepted\n";
    for (const auto& t : trace)
        s += std::to_string(t.round) + ',' + fmt(t.dispersion) + ',' + fmt(t.rank) + ',' + fmt(t.hr_at_k) + ',' +
             std::to_string(t.steps) + ',' + std::to_string(t.accepted) + '\n';
    return s;
}

int cmd_attack(const CommonOptions& co) {
    const RunConfig c = resolve_config(co);
    const InteractionDataset ds = load_config_dataset(c.dataset);
    const fs::path dir = prepare_out(c, co);

    ExperimentCell cell;
    cell.dataset = c.dataset.tag;
    cell.victim = c.model;
    cell.attack = parse_attack_kind(c.attack.kind);
    cell.attack_size = c.attack.attack_size;
    cell.attack_config = c.attack.params;
    if (c.attack.mode == "blackbox") cell.surrogate = c.attack.surrogate;
    cell.n_targets = c.dataset.n_targets;
    cell.popular_fraction = c.attack.popular_fraction;
    cell.k = c.eval.k;
    cell.seed = c.eval.base_seed;

    const auto targets = select_target_items(ds, cell.n_targets, cell.seed);
    const AttackBudget budget = attack_budget(ds, cell.attack_size, targets);
    MaliciousProfile profile;
    std::vector<RoundTrace> trace;
    if (is_clear(cell.attack)) {
        ClearResult r = clear_attack(ds, inner_model(cell), effective_attack_config(cell), budget);
        profile = std::move(r.profile);
        trace = std::move(r.trace);
    } else {
        profile = build_attack(ds, cell, budget);
    }
    save_profile(profile, dir / "profile.json");
    json tj = json::array();
    for (Index t : budget.target_items) tj.push_back(ds.items.external(t));
    write_text(dir / "targets.json",
               json{{"targets", budget.target_items}, {"external_ids", tj}, {"n_malicious", budget.n_malicious},
                    {"per_user_budget", budget.per_user_budget}}
                       .dump(2) +
                   '\n');
    if (is_clear(cell.attack)) write_text(dir / "trace.csv", trace_csv(trace));
    write_run_log(dir, "attack");
    std::printf("%s: %zu malicious users x %zu items -> %s\n", cell.attack_tag().c_str(), budget.n_malicious,
                budget.per_user_budget, (dir / "profile.json").string().c_str());
    return 0;
}

// --- eval / sweep -----------------------------------------------------------

void print_aggregates(const AttackReport& r) {
    std::printf("%-10s %-28s %8s %8s %10s %10s %10s\n", "model", "attack", "size", "alpha", "HR@K", "NDCG@K", "Recall@K");
    for (const auto& a : r.aggregates)
        std::printf("%-10s %-28s %8.4f %8.4f %10.6f %10.6f %10.6f\n", a.model.c_str(), a.attack.c_str(), a.attack_size,
                    a.alpha, a.hr_at_k, a.ndcg_at_k, a.recall_at_k);
    for (const auto& f : r.failures)
        std::fprintf(stderr, "failed cell %s/%s seed %llu: %s\n", f.model.c_str(), f.attack.c_str(),
                     static_cast<unsigned long long>(f.seed), f.error.c_str());
}

int run_grid(const RunConfig& c, const CommonOptions& co, const std::string& stem) {
    const InteractionDataset ds = load_config_dataset(c.dataset);
    const fs::path dir = prepare_out(c, co);
    RunOptions ro;
    ro.cache_dir = dir / "cache";
    ro.workers = co.workers;
    const AttackReport report = run_experiment(ds, make_grid(c), ro);
    emit_report(report, dir, stem);
    write_run_log(dir, stem);
    print_aggregates(report);
    return 0;
}

int cmd_eval(const CommonOptions& co) {
    const RunConfig c = resolve_config(co);
    return run_grid(c, co, "report");
}

struct SweepOptions {
    std::string axis;
    std::vector<double> values;
};

int cmd_sweep(CommonOptions co, const SweepOptions& o) {
    if (!o.axis.empty()) co.sets.push_back("eval.sweep.axis=\"" + o.axis + "\"");
    if (!o.values.empty()) co.sets.push_back("eval.sweep.values=" + json(o.values).dump());
    const RunConfig c = resolve_config(co);
    if (c.eval.sweep.axis.empty()) throw InputError("sweep needs eval.sweep.axis (or --axis)");
    return run_grid(c, co, "sweep");
}

// --- spectra ----------------------------------------------------------------

struct SpectraOptions {
    std::vector<std::string> checkpoints;
    std::vector<std::string> profiles;
};

std::string spectrum_csv(const SpectralReport& all, const SpectralReport& users, const SpectralReport& items) {
    std::string s = "index,all,users,items\n";
    for (std::size_t i = 0; i < all.singular_values.size(); ++i)
        s += std::to_string(i) + ',' + fmt(all.singular_values[i]) + ',' + fmt(users.singular_values[i]) + ',' +
             fmt(items.singular_values[i]) + '\n';
    return s;
}

json spectral_json(const SpectralReport& r) {
    return json{{"max_over_mean", r.max_over_mean}, {"max_over_min_nonzero", r.max_over_min_nonzero}};
}

int cmd_spectra(const CommonOptions& co, const SpectraOptions& o) {
    if (o.checkpoints.empty()) throw InputError("spectra needs at least one checkpoint");
    if (!o.profiles.empty() && o.profiles.size() != o.checkpoints.size())
        throw InputError("--profile must be given once per checkpoint or not at all");
    const RunConfig c = resolve_config(co);
    const InteractionDataset ds = load_config_dataset(c.dataset);
    const fs::path dir = prepare_out(c, co);

    json summary = json{{"checkpoints", json::array()}, {"comparisons", json::array()}};
    std::vector<Matrix> tables;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < o.checkpoints.size(); ++i) {
        const ModelState state = load_checkpoint(o.checkpoints[i]);
        std::optional<MaliciousProfiles> mal;
        if (!o.profiles.empty() && !o.profiles[i].empty()) mal = read_profile_sets(o.profiles[i], ds.n_items());
        const std::size_t n_mal = mal ? mal->size() : 0;
        if (state.n_users() != ds.n_users() + n_mal || state.n_items() != ds.n_items())
            throw InputError("checkpoint " + o.checkpoints[i] + " does not match the dataset (pass its --profile)");
        const FinalTables t = final_tables(state, ds, mal ? &*mal : nullptr);
        const Matrix all = vstack(t.users, t.items);
        const SpectralReport ra = singular_values(all, o.checkpoints[i]);
        const SpectralReport ru = singular_values(t.users);
        const SpectralReport ri = singular_values(t.items);
        const std::string name = std::to_string(i) + "_" + fs::path(o.checkpoints[i]).stem().string();
        write_text(dir / ("spectrum_" + name + ".csv"), spectrum_csv(ra, ru, ri));
        summary["checkpoints"].push_back(json{{"checkpoint", o.checkpoints[i]},
                                              {"model", state.config.tag()},
                                              {"contrastive", state.config.contrastive()},
                                              {"all", spectral_json(ra)},
                                              {"users", spectral_json(ru)},
                                              {"items", spectral_json(ri)}});
        tables.push_back(all);
        names.push_back(o.checkpoints[i]);
    }
    for (std::size_t i = 1; i < tables.size(); ++i) {
        const SmoothnessComparison cmp = smoothness_compare(tables[0], tables[i]);
        summary["comparisons"].push_back(json{{"a", names[0]},
                                              {"b", names[i]},
                                              {"a_max_over_mean", cmp.a.max_over_mean},
                                              {"b_max_over_mean", cmp.b.max_over_mean},
                                              {"a_sharper", cmp.a_sharper}});
    }
    write_text(dir / "spectra_summary.json", summary.dump(2) + '\n');
    write_run_log(dir, "spectra");
    for (const auto& ck : summary["checkpoints"])
        std::printf("%-40s %-10s sigma_max/mean %.6f\n", ck["checkpoint"].get<std::string>().c_str(),
                    ck["model"].get<std::string>().c_str(), ck["all"]["max_over_mean"].get<double>());
    return 0;
}

// --- report -----------------------------------------------------------------

struct ReportOptions {
    std::vector<std::string> inputs;
    std::string out;
    std::string stem = "report";
};

int cmd_report(const ReportOptions& o) {
    if (o.inputs.empty()) throw InputError("report needs at least one report JSON");
    AttackReport merged;
    for (const auto& in : o.inputs) {
        AttackReport r = report_from_json(read_json(in));
        merged.rows.insert(merged.rows.end(), r.rows.begin(), r.rows.end());
        merged.failures.insert(merged.failures.end(), r.failures.begin(), r.failures.end());
    }
    aggregate(merged);
    const char* root = std::getenv("RECPOISON_OUT");
    const fs::path dir = !o.out.empty() ? fs::path(o.out) : fs::path(root && *root ? root : ".");
    std::error_code ec;
    fs::create_directories(dir, ec);
    emit_report(merged, dir, o.stem);
    print_aggregates(merged);
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Poisoning attacks against graph and contrastive recommenders"};
    app.require_subcommand(1);

    IngestOptions ingest;
    auto* s_ingest = app.add_subcommand("ingest", "load, split and persist an interaction file");
    s_ingest->add_option("raw", ingest.raw, "raw interaction file (user<sep>item per line)");
    s_ingest->add_flag("--synthetic", ingest.synthetic, "use the bundled synthetic long-tail generator");
    s_ingest->add_option("--synthetic-seed", ingest.synthetic_seed, "generator seed");
    s_ingest->add_option("--split-seed", ingest.split_seed, "split seed");
    s_ingest->add_option("-o,--out", ingest.out, "dataset directory")->required();

    CommonOptions train_co;
    TrainOptions train_o;
    auto* s_train = app.add_subcommand("train", "train a recommender; writes checkpoint.json and loss_curve.csv");
    add_common(s_train, train_co);
    s_train->add_option("--resume", train_o.resume, "continue from this checkpoint up to model.epochs");
    s_train->add_option("--profile", train_o.profile, "inject this malicious profile JSON");

    CommonOptions attack_co;
    std::string attack_kind;
    auto* s_attack = app.add_subcommand("attack", "build a malicious profile; writes profile.json and trace.csv");
    add_common(s_attack, attack_co);
    s_attack->add_option("--kind", attack_kind, "Random, Bandwagon, CLeaR, CLeaR_D, CLeaR_R");

    CommonOptions eval_co;
    auto* s_eval = app.add_subcommand("eval", "run the models x attacks x seeds grid and emit a report");
    add_common(s_eval, eval_co);

    CommonOptions sweep_co;
    SweepOptions sweep_o;
    auto* s_sweep = app.add_subcommand("sweep", "grid over attack_size or alpha");
    add_common(s_sweep, sweep_co);
    s_sweep->add_option("--axis", sweep_o.axis, "attack_size or alpha");
    s_sweep->add_option("--values", sweep_o.values, "axis values");

    CommonOptions spectra_co;
    SpectraOptions spectra_o;
    auto* s_spectra = app.add_subcommand("spectra", "singular values of trained embeddings");
    add_common(s_spectra, spectra_co);
    s_spectra->add_option("checkpoints", spectra_o.checkpoints, "checkpoint files")->required();
    s_spectra->add_option("--profile", spectra_o.profiles, "malicious profile per checkpoint (poisoned checkpoints)");

    ReportOptions report_o;
    auto* s_report = app.add_subcommand("report", "merge report JSON files and re-emit CSV/JSON");
    s_report->add_option("inputs", report_o.inputs, "report JSON files")->required();
    s_report->add_option("-o,--out", report_o.out, "output directory");
    s_report->add_option("--stem", report_o.stem, "output file stem");

    try {
        app.parse(argc, argv);
        if (s_ingest->parsed()) return cmd_ingest(ingest);
        if (s_train->parsed()) return cmd_train(train_co, train_o);
        if (s_attack->parsed()) {
            if (!attack_kind.empty()) attack_co.sets.push_back("attack.kind=\"" + attack_kind + "\"");
            return cmd_attack(attack_co);
        }
        if (s_eval->parsed()) return cmd_eval(eval_co);
        if (s_sweep->parsed()) return cmd_sweep(sweep_co, sweep_o);
        if (s_spectra->parsed()) return cmd_spectra(spectra_co, spectra_o);
        if (s_report->parsed()) return cmd_report(report_o);
        return 2;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace recpoison
