#include "recpoison/config.hpp"

#include <cstdlib>
#include <fstream>

#include "recpoison/error.hpp"
#include "recpoison/synthetic.hpp"

namespace recpoison {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void require_object(const json& j, const std::string& what) {
    if (!j.is_object()) throw InputError(what + " must be a JSON object");
}

DatasetSection dataset_from_json(const json& j, DatasetSection d) {
    require_object(j, "dataset");
    for (const auto& [key, v] : j.items()) {
        if (key == "path") d.path = v.get<std::string>();
        else if (key == "tag") d.tag = v.get<std::string>();
        else if (key == "split_seed") d.split_seed = v.get<std::uint64_t>();
        else if (key == "n_targets") d.n_targets = v.get<std::size_t>();
        else throw InputError("unknown dataset config key '" + key + "'");
    }
    return d;
}

AttackSection attack_from_json(const json& j, AttackSection a) {
    require_object(j, "attack");
    json params = json::object();
    for (const auto& [key, v] : j.items()) {
        if (key == "kind") a.kind = v.get<std::string>();
        else if (key == "attack_size") a.attack_size = v.get<double>();
        else if (key == "budget_rule") a.budget_rule = v.get<std::string>();
        else if (key == "popular_fraction") a.popular_fraction = v.get<double>();
        else if (key == "mode") a.mode = v.get<std::string>();
        else if (key == "surrogate") a.surrogate = v.is_null() ? std::nullopt : std::optional(model_config_from_json(v));
        else params[key] = v;
    }
    a.params = attack_config_from_json(params, a.params);
    return a;
}

EvalSection eval_from_json(const json& j, EvalSection e, const ModelConfig& base_model) {
    require_object(j, "eval");
    for (const auto& [key, v] : j.items()) {
        if (key == "k") e.k = v.get<std::size_t>();
        else if (key == "seeds") e.seeds = v.get<std::size_t>();
        else if (key == "base_seed") e.base_seed = v.get<std::uint64_t>();
        else if (key == "metrics") e.metrics = v.get<std::vector<std::string>>();
        else if (key == "attacks") e.attacks = v.get<std::vector<std::string>>();
        else if (key == "models") {
            e.models.clear();
            for (const auto& m : v) e.models.push_back(model_config_from_json(m, base_model));
        } else if (key == "sweep") {
            require_object(v, "eval.sweep");
            for (const auto& [sk, sv] : v.items()) {
                if (sk == "axis") e.sweep.axis = sv.get<std::string>();
                else if (sk == "values") e.sweep.values = sv.get<std::vector<double>>();
                else throw InputError("unknown eval.sweep key '" + sk + "'");
            }
        } else {
            throw InputError("unknown eval config key '" + key + "'");
        }
    }
    return e;
}

}  // namespace

RunConfig default_run_config() {
    RunConfig c;
    c.model.cl = ClKind::SimGCL;
    c.model.dim = 32;
    c.model.lr = 0.01;
    c.model.epochs = 40;
    return c;
}

void RunConfig::validate() const {
    if (dataset.path.empty()) throw InputError("dataset.path must not be empty");
    model.validate();
    for (const auto& m : eval.models) m.validate();
    if (attack.surrogate) attack.surrogate->validate();
    attack.params.validate();
    parse_attack_kind(attack.kind);
    for (const auto& a : eval.attacks) parse_attack_kind(a);
    if (!(attack.attack_size > 0.0 && attack.attack_size <= 1.0)) throw InputError("attack.attack_size must be in (0,1]");
    if (attack.budget_rule != "mean") throw InputError("attack.budget_rule must be 'mean'");
    if (!(attack.popular_fraction > 0.0 && attack.popular_fraction <= 1.0))
        throw InputError("attack.popular_fraction must be in (0,1]");
    if (attack.mode != "whitebox" && attack.mode != "blackbox") throw InputError("attack.mode must be whitebox or blackbox");
    if (attack.mode == "blackbox" && !attack.surrogate) throw InputError("blackbox mode needs attack.surrogate");
    if (eval.k == 0) throw InputError("eval.k must be >= 1");
    if (eval.seeds == 0) throw InputError("eval.seeds must be >= 1");
    for (const auto& m : eval.metrics)
        if (m != "hr" && m != "ndcg" && m != "recall") throw InputError("unknown metric '" + m + "'");
    const auto& axis = eval.sweep.axis;
    if (!axis.empty() && axis != "attack_size" && axis != "alpha")
        throw InputError("eval.sweep.axis must be attack_size or alpha");
    if (!axis.empty() && eval.sweep.values.empty()) throw InputError("eval.sweep.values must not be empty");
    if (axis == "attack_size")
        for (double v : eval.sweep.values)
            if (!(v > 0.0 && v <= 1.0)) throw InputError("attack sizes must be in (0,1]");
    if (axis == "alpha")
        for (double v : eval.sweep.values)
            if (!(v >= 0.0)) throw InputError("alpha values must be >= 0");
    if (output.empty()) throw InputError("output must not be empty");
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
    require_object(j, "config");
    try {
        // Model first so eval.models patches apply on top of it.
        if (j.contains("model")) c.model = model_config_from_json(j["model"], c.model);
        for (const auto& [key, v] : j.items()) {
            if (key == "dataset") c.dataset = dataset_from_json(v, c.dataset);
            else if (key == "model") continue;
            else if (key == "attack") c.attack = attack_from_json(v, c.attack);
            else if (key == "eval") c.eval = eval_from_json(v, c.eval, c.model);
            else if (key == "output") c.output = v.get<std::string>();
            else throw InputError("unknown config section '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

json to_json(const RunConfig& c) {
    json attack = to_json(c.attack.params);
    attack["kind"] = c.attack.kind;
    attack["attack_size"] = c.attack.attack_size;
    attack["budget_rule"] = c.attack.budget_rule;
    attack["popular_fraction"] = c.attack.popular_fraction;
    attack["mode"] = c.attack.mode;
    attack["surrogate"] = c.attack.surrogate ? to_json(*c.attack.surrogate) : json(nullptr);
    json models = json::array();
    for (const auto& m : c.eval.models) models.push_back(to_json(m));
    return json{{"dataset",
                 {{"path", c.dataset.path},
                  {"tag", c.dataset.tag},
                  {"split_seed", c.dataset.split_seed},
                  {"n_targets", c.dataset.n_targets}}},
                {"model", to_json(c.model)},
                {"attack", attack},
                {"eval",
                 {{"k", c.eval.k},
                  {"seeds", c.eval.seeds},
                  {"base_seed", c.eval.base_seed},
                  {"metrics", c.eval.metrics},
                  {"models", models},
                  {"attacks", c.eval.attacks},
                  {"sweep", {{"axis", c.eval.sweep.axis}, {"values", c.eval.sweep.values}}}}},
                {"output", c.output}};
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

InteractionDataset load_config_dataset(const DatasetSection& d) {
    if (d.path == "synthetic") return split_dataset(generate_synthetic(SyntheticSpec{}), {}, d.split_seed);
    if (fs::is_directory(d.path)) return load_dataset(d.path);
    if (!fs::exists(d.path)) throw InputError("dataset path not found: " + d.path);
    return split_dataset(load_interactions(d.path), {}, d.split_seed);
}

ExperimentGrid make_grid(const RunConfig& c) {
    ExperimentGrid g;
    g.dataset = c.dataset.tag;
    g.models = c.eval.models.empty() ? std::vector<ModelConfig>{c.model} : c.eval.models;
    g.attacks = c.eval.attacks.empty() ? std::vector<std::string>{c.attack.kind} : c.eval.attacks;
    g.attack_sizes = {c.attack.attack_size};
    g.seeds = c.eval.seeds;
    g.base_seed = c.eval.base_seed;
    g.attack_config = c.attack.params;
    if (c.attack.mode == "blackbox") g.surrogate = c.attack.surrogate;
    g.n_targets = c.dataset.n_targets;
    g.popular_fraction = c.attack.popular_fraction;
    g.k = c.eval.k;
    if (c.eval.sweep.axis == "attack_size") g.attack_sizes = c.eval.sweep.values;
    if (c.eval.sweep.axis == "alpha") g.alphas = c.eval.sweep.values;
    return g;
}

fs::path output_dir(const RunConfig& c, const std::optional<fs::path>& override_dir) {
    if (override_dir) return *override_dir;
    const char* root = std::getenv("RECPOISON_OUT");
    return fs::path(root && *root ? root : ".") / c.output;
}

void write_resolved_config(const RunConfig& c, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create " + dir.string() + ": " + ec.message());
    std::ofstream out(dir / "resolved_config.json");
    if (!out) throw InputError("cannot write " + (dir / "resolved_config.json").string());
    out << to_json(c).dump(2) << '\n';
}

}  // namespace recpoison
