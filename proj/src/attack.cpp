#include "recpoison/attack.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "recpoison/error.hpp"
#include "recpoison/metrics.hpp"

namespace recpoison {

using nlohmann::json;

namespace {

bool contains(const std::vector<Index>& sorted, Index x) { return std::binary_search(sorted.begin(), sorted.end(), x); }

std::vector<Index> sorted_targets(const AttackBudget& b) {
    auto t = b.target_items;
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

void check_budget(const AttackBudget& b, std::size_t n_items) {
    if (b.n_malicious == 0) throw InputError("attack budget needs at least one malicious user");
    if (b.per_user_budget < b.target_items.size()) throw InputError("per-user budget is smaller than the target set");
    for (Index t : b.target_items)
        if (t >= n_items) throw InputError("target item out of range");
}

MaliciousProfile profile_from_sets(const AttackBudget& budget, std::size_t n_items, MaliciousProfiles sets) {
    if (sets.size() != budget.n_malicious) throw InputError("profile has the wrong number of malicious users");
    MaliciousProfile p;
    p.budget = budget;
    p.weights = Matrix(budget.n_malicious, n_items);
    for (std::size_t m = 0; m < sets.size(); ++m) {
        std::sort(sets[m].begin(), sets[m].end());
        for (Index i : sets[m]) p.weights(m, i) = 1.0;
    }
    p.discretized = std::move(sets);
    return p;
}

// Fills each malicious user's free slots from `pool` (already excludes targets).
MaliciousProfile sample_fillers(const AttackBudget& budget, std::size_t n_items, const std::vector<Index>& pool,
                                std::uint64_t seed, std::uint64_t stream) {
    check_budget(budget, n_items);
    const auto targets = sorted_targets(budget);
    const std::size_t slots = budget.per_user_budget - targets.size();
    MaliciousProfiles sets(budget.n_malicious);
    for (std::size_t m = 0; m < budget.n_malicious; ++m) {
        auto rng = make_rng(seed, {stream, m});
        std::vector<Index> chosen;
        std::sample(pool.begin(), pool.end(), std::back_inserter(chosen), std::min(slots, pool.size()), rng);
        chosen.insert(chosen.end(), targets.begin(), targets.end());
        sets[m] = std::move(chosen);
    }
    return profile_from_sets(budget, n_items, std::move(sets));
}

}  // namespace

void AttackConfig::validate() const {
    if (!(alpha >= 0.0)) throw InputError("attack.alpha must be >= 0");
    if (alpha == 0.0 && !use_dispersion) throw InputError("attack objective is empty (alpha = 0 and dispersion off)");
    if (rounds == 0) throw InputError("attack.rounds must be >= 1");
    if (inner_epochs == 0) throw InputError("attack.inner_epochs must be >= 1");
    if (!(step_size > 0.0)) throw InputError("attack.step_size must be > 0");
    if (k == 0) throw InputError("attack.k must be >= 1");
}

json to_json(const AttackConfig& c) {
    return json{{"alpha", c.alpha},
                {"use_dispersion", c.use_dispersion},
                {"rounds", c.rounds},
                {"inner_epochs", c.inner_epochs},
                {"outer_steps", c.outer_steps},
                {"step_size", c.step_size},
                {"user_sample", c.user_sample},
                {"k", c.k},
                {"seed", c.seed},
                {"stacked", c.stacked},
                {"norm", c.norm == DispersionNorm::L1 ? "l1" : "frobenius"},
                {"patience", c.patience},
                {"max_halvings", c.max_halvings}};
}

AttackConfig attack_config_from_json(const json& j, AttackConfig c) {
    if (!j.is_object()) throw InputError("attack config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "alpha") c.alpha = v.get<double>();
            else if (key == "use_dispersion") c.use_dispersion = v.get<bool>();
            else if (key == "rounds") c.rounds = v.get<std::size_t>();
            else if (key == "inner_epochs") c.inner_epochs = v.get<std::size_t>();
            else if (key == "outer_steps") c.outer_steps = v.get<std::size_t>();
            else if (key == "step_size") c.step_size = v.get<double>();
            else if (key == "user_sample") c.user_sample = v.get<std::size_t>();
            else if (key == "k") c.k = v.get<std::size_t>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "stacked") c.stacked = v.get<bool>();
            else if (key == "norm") {
                const auto s = v.get<std::string>();
                if (s == "l1") c.norm = DispersionNorm::L1;
                else if (s == "frobenius") c.norm = DispersionNorm::Frobenius;
                else throw InputError("attack.norm must be 'l1' or 'frobenius'");
            } else if (key == "patience") c.patience = v.get<std::size_t>();
            else if (key == "max_halvings") c.max_halvings = v.get<std::size_t>();
            else throw InputError("unknown attack config key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("attack config: ") + e.what());
    }
    c.validate();
    return c;
}

void MaliciousProfile::validate(std::size_t n_items) const {
    check_budget(budget, n_items);
    if (discretized.size() != budget.n_malicious) throw InputError("profile has the wrong number of malicious users");
    const auto targets = sorted_targets(budget);
    for (const auto& set : discretized) {
        if (set.size() > budget.per_user_budget) throw InputError("malicious profile exceeds the per-user budget");
        auto s = set;
        std::sort(s.begin(), s.end());
        if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw InputError("malicious profile repeats an item");
        if (!s.empty() && s.back() >= n_items) throw InputError("malicious profile item out of range");
        for (Index t : targets)
            if (!contains(s, t)) throw InputError("malicious profile is missing a target item");
    }
    if (!weights.empty()) {
        if (weights.rows() != budget.n_malicious || weights.cols() != n_items)
            throw InputError("relaxed weight matrix has the wrong shape");
        for (double v : weights.data())
            if (!(v >= 0.0 && v <= 1.0)) throw InputError("relaxed weight outside [0,1]");
        for (std::size_t m = 0; m < weights.rows(); ++m)
            for (Index t : targets)
                if (weights(m, t) != 1.0) throw InputError("target column of w is not pinned at 1");
    }
}

MaliciousProfile targets_only_profile(const AttackBudget& budget, std::size_t n_items) {
    check_budget(budget, n_items);
    return profile_from_sets(budget, n_items, MaliciousProfiles(budget.n_malicious, sorted_targets(budget)));
}

MaliciousProfile random_attack(const AttackBudget& budget, const InteractionDataset& ds, std::uint64_t seed) {
    const auto targets = sorted_targets(budget);
    std::vector<Index> pool;
    for (Index i = 0; i < ds.n_items(); ++i)
        if (!contains(targets, i)) pool.push_back(i);
    return sample_fillers(budget, ds.n_items(), pool, seed, 0x4a4d);
}

MaliciousProfile bandwagon_attack(const AttackBudget& budget, const InteractionDataset& ds, double popular_fraction,
                                  std::uint64_t seed) {
    if (!(popular_fraction > 0.0 && popular_fraction <= 1.0)) throw InputError("popular_fraction must be in (0,1]");
    std::vector<Index> ranked(ds.n_items());
    std::iota(ranked.begin(), ranked.end(), Index{0});
    auto pop = ds.item_popularity;
    pop.resize(ds.n_items(), 0);
    std::stable_sort(ranked.begin(), ranked.end(), [&](Index a, Index b) { return pop[a] > pop[b]; });
    const auto n_pop = static_cast<std::size_t>(std::ceil(popular_fraction * static_cast<double>(ds.n_items()) - 1e-9));
    const auto targets = sorted_targets(budget);
    std::vector<Index> pool;
    for (std::size_t r = 0; r < std::min(n_pop, ranked.size()); ++r)
        if (!contains(targets, ranked[r])) pool.push_back(ranked[r]);
    std::sort(pool.begin(), pool.end());
    return sample_fillers(budget, ds.n_items(), pool, seed, 0xba9d);
}

double cw_g(double x) { return x >= 0.0 ? x : std::expm1(x); }
double cw_g_prime(double x) { return x >= 0.0 ? 1.0 : std::exp(x); }

RankLossResult cw_rank_loss(const Matrix& user_final, const Matrix& item_final, const std::vector<Index>& targets,
                            std::size_t k, std::span<const Index> users,
                            const std::vector<std::vector<Index>>& train_items, bool with_gradient) {
    if (k == 0) throw InputError("CW loss needs K >= 1");
    if (user_final.cols() != item_final.cols()) throw InputError("CW loss: embedding widths differ");
    auto sorted = targets;
    std::sort(sorted.begin(), sorted.end());
    for (Index t : sorted)
        if (t >= item_final.rows()) throw InputError("CW loss: target out of range");

    RankLossResult r;
    if (with_gradient) {
        r.grad_users = Matrix(user_final.rows(), user_final.cols());
        r.grad_items = Matrix(item_final.rows(), item_final.cols());
    }
    const std::size_t n_items = item_final.rows();
    std::vector<double> scores(n_items);
    std::vector<Index> cand;
    for (Index u : users) {
        if (u >= user_final.rows()) throw InputError("CW loss: user out of range");
        static const std::vector<Index> none;
        const auto& seen = u < train_items.size() ? train_items[u] : none;
        const auto zu = user_final.row(u);
        for (Index i = 0; i < n_items; ++i) scores[i] = dot(zu, item_final.row(i));
        cand.clear();
        for (Index i = 0; i < n_items; ++i)
            if (!contains(sorted, i) && !contains(seen, i)) cand.push_back(i);
        if (cand.empty()) continue;
        const std::size_t pos = std::min(k, cand.size()) - 1;
        std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(pos), cand.end(), [&](Index a, Index b) {
            return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
        });
        const Index last = cand[pos];
        for (Index t : sorted) {
            if (contains(seen, t)) continue;
            const double x = scores[t] - scores[last];
            r.loss += cw_g(x);
            ++r.pairs;
            if (!with_gradient) continue;
            const double gp = cw_g_prime(x);
            auto gu = r.grad_users.row(u);
            const auto zt = item_final.row(t), zl = item_final.row(last);
            for (std::size_t c = 0; c < zu.size(); ++c) gu[c] += gp * (zt[c] - zl[c]);
            axpy(gp, zu, r.grad_items.row(t));
            axpy(-gp, zu, r.grad_items.row(last));
        }
    }
    return r;
}

AttackProblem make_attack_problem(const InteractionDataset& ds, const ModelState& state, const Matrix& w,
                                  const std::vector<Index>& targets, const AttackConfig& config, Rng& rng) {
    config.validate();
    if (w.cols() != ds.n_items() || state.n_items() != ds.n_items() || state.n_users() != ds.n_users() + w.rows())
        throw InputError("attack problem: model state, dataset and w disagree in shape");
    AttackProblem p;
    p.n_genuine = ds.n_users();
    p.n_malicious = w.rows();
    p.n_items = ds.n_items();
    // MF has no propagation; a virtual one-layer propagation carries the edge gradient.
    p.n_layers = std::max<std::size_t>(1, state.config.layers());
    p.base = state.stacked();
    for (const auto& x : ds.train) p.genuine_edges.push_back({x.user, x.item, 1.0});
    p.targets = targets;
    std::sort(p.targets.begin(), p.targets.end());
    p.train_items = ds.train_items_by_user();
    p.config = config;
    refresh_problem(p, w, rng);
    return p;
}

void refresh_problem(AttackProblem& p, const Matrix& w, Rng& rng) {
    p.frozen_degrees.assign(p.n_nodes(), 0.0);
    for (const auto& e : p.genuine_edges) {
        p.frozen_degrees[e.user] += 1.0;
        p.frozen_degrees[p.n_users() + e.item] += 1.0;
    }
    for (std::size_t m = 0; m < p.n_malicious; ++m)
        for (std::size_t i = 0; i < p.n_items; ++i) {
            p.frozen_degrees[p.n_genuine + m] += w(m, i);
            p.frozen_degrees[p.n_users() + i] += w(m, i);
        }
    // Degree floor of 1 keeps every node on the propagation path, so an edge
    // appearing from w = 0 changes Z continuously.
    for (double& d : p.frozen_degrees) d = std::max(d, 1.0);

    p.deflation.clear();
    if (p.config.use_dispersion) {
        const Matrix z = relaxed_forward(p, w);
        if (p.config.stacked) {
            p.deflation.push_back(draw_deflation(z, rng));
        } else {
            p.deflation.push_back(draw_deflation(slice_rows(z, 0, p.n_users()), rng));
            p.deflation.push_back(draw_deflation(slice_rows(z, p.n_users(), p.n_items), rng));
        }
    }

    p.rank_users.resize(p.n_genuine);
    std::iota(p.rank_users.begin(), p.rank_users.end(), Index{0});
    if (p.config.user_sample > 0 && p.config.user_sample < p.n_genuine) {
        std::vector<Index> sample;
        std::sample(p.rank_users.begin(), p.rank_users.end(), std::back_inserter(sample), p.config.user_sample, rng);
        p.rank_users = std::move(sample);
    }
}

PropagationGraph relaxed_graph(const AttackProblem& p, const Matrix& w) {
    if (w.rows() != p.n_malicious || w.cols() != p.n_items) throw InputError("relaxed weights have the wrong shape");
    auto edges = p.genuine_edges;
    for (std::size_t m = 0; m < p.n_malicious; ++m)
        for (std::size_t i = 0; i < p.n_items; ++i)
            if (w(m, i) != 0.0)
                edges.push_back({static_cast<Index>(p.n_genuine + m), static_cast<Index>(i), w(m, i)});
    return build_graph_from_edges(p.n_users(), p.n_items, std::move(edges), &p.frozen_degrees);
}

Matrix relaxed_forward(const AttackProblem& p, const Matrix& w) {
    return propagate(relaxed_graph(p, w), p.base, p.n_layers);
}

AttackTerms attack_loss(const AttackProblem& p, const Matrix& z) {
    AttackTerms t;
    if (p.config.use_dispersion) {
        if (p.config.stacked) {
            t.dispersion = dispersion_loss(z, p.deflation.at(0), p.config.norm);
        } else {
            t.dispersion = dispersion_loss(slice_rows(z, 0, p.n_users()), p.deflation.at(0), p.config.norm) +
                           dispersion_loss(slice_rows(z, p.n_users(), p.n_items), p.deflation.at(1), p.config.norm);
        }
    }
    t.rank = cw_rank_loss(slice_rows(z, 0, p.n_genuine), slice_rows(z, p.n_users(), p.n_items), p.targets, p.config.k,
                          p.rank_users, p.train_items)
                 .loss;
    t.total = t.dispersion + p.config.alpha * t.rank;
    return t;
}

Matrix attack_loss_gradient(const AttackProblem& p, const Matrix& z) {
    Matrix g(z.rows(), z.cols());
    auto place = [&](const Matrix& block, std::size_t offset, double scale) {
        for (std::size_t r = 0; r < block.rows(); ++r) axpy(scale, block.row(r), g.row(offset + r));
    };
    if (p.config.use_dispersion) {
        if (p.config.stacked) {
            place(dispersion_gradient(z, p.deflation.at(0), p.config.norm), 0, 1.0);
        } else {
            place(dispersion_gradient(slice_rows(z, 0, p.n_users()), p.deflation.at(0), p.config.norm), 0, 1.0);
            place(dispersion_gradient(slice_rows(z, p.n_users(), p.n_items), p.deflation.at(1), p.config.norm),
                  p.n_users(), 1.0);
        }
    }
    if (p.config.alpha > 0.0) {
        auto r = cw_rank_loss(slice_rows(z, 0, p.n_genuine), slice_rows(z, p.n_users(), p.n_items), p.targets,
                              p.config.k, p.rank_users, p.train_items, true);
        place(r.grad_users, 0, p.config.alpha);
        place(r.grad_items, p.n_users(), p.config.alpha);
    }
    return g;
}

Matrix outer_gradient(const AttackProblem& p, const Matrix& w) {
    const auto graph = relaxed_graph(p, w);
    const std::size_t L = p.n_layers;
    const auto layers = propagate_layers(graph, p.base, L);
    const Matrix g = attack_loss_gradient(p, layer_mean(layers));

    // d<G, mean_l A^l E0>/dA = 1/(L+1) sum_l sum_{k<l} (A^k G)(A^{l-1-k} E0)^T,
    // so with S_k = sum_{j <= L-1-k} E_j the (m,i) entry pairs A^k G with S_k.
    std::vector<Matrix> gk{g};
    for (std::size_t k = 1; k < L; ++k) gk.push_back(graph.multiply(gk.back()));
    std::vector<Matrix> sk(L);
    sk[L - 1] = layers[0];
    for (std::size_t k = L - 1; k-- > 0;) {
        sk[k] = sk[k + 1];
        sk[k] += layers[L - 1 - k];
    }

    Matrix out(p.n_malicious, p.n_items);
    const double inv = 1.0 / static_cast<double>(L + 1);
    for (std::size_t m = 0; m < p.n_malicious; ++m) {
        const std::size_t um = p.n_genuine + m;
        for (std::size_t i = 0; i < p.n_items; ++i) {
            if (contains(p.targets, static_cast<Index>(i))) continue;
            const std::size_t vi = p.n_users() + i;
            double s = 0.0;
            for (std::size_t k = 0; k < L; ++k) s += dot(gk[k].row(um), sk[k].row(vi)) + dot(gk[k].row(vi), sk[k].row(um));
            out(m, i) = s * inv / std::sqrt(p.frozen_degrees[um] * p.frozen_degrees[vi]);
        }
    }
    if (!out.all_finite()) throw NumericError("non-finite outer gradient");
    return out;
}

AscentStats outer_ascent(const InteractionDataset& ds, const ModelState& state, Matrix& w,
                         const std::vector<Index>& targets, const AttackConfig& config, Rng& rng) {
    AttackProblem p = make_attack_problem(ds, state, w, targets, config, rng);
    AscentStats st;
    for (std::size_t step = 0; step < config.outer_steps; ++step) {
        if (step > 0) refresh_problem(p, w, rng);
        const double current = attack_loss(p, relaxed_forward(p, w)).total;
        if (!std::isfinite(current)) throw NumericError("non-finite attack loss at outer step " + std::to_string(step));
        const Matrix g = outer_gradient(p, w);
        double gmax = 0.0;
        for (double v : g.data()) gmax = std::max(gmax, std::abs(v));
        ++st.steps;
        if (gmax == 0.0) {
            ++st.accepted;
            continue;
        }
        double eta = config.step_size;
        for (std::size_t h = 0; h <= config.max_halvings; ++h, eta *= 0.5) {
            Matrix trial = w;
            auto& d = trial.data();
            for (std::size_t k = 0; k < d.size(); ++k) d[k] = std::clamp(d[k] + eta * g.data()[k] / gmax, 0.0, 1.0);
            if (attack_loss(p, relaxed_forward(p, trial)).total >= current) {
                w = std::move(trial);
                ++st.accepted;
                break;
            }
        }
    }
    st.last = attack_loss(p, relaxed_forward(p, w));
    return st;
}

MaliciousProfiles greedy_discretize(const Matrix& w, const AttackBudget& budget) {
    check_budget(budget, w.cols());
    if (w.rows() != budget.n_malicious) throw InputError("w rows must equal the number of malicious users");
    const auto targets = sorted_targets(budget);
    const std::size_t slots = budget.per_user_budget - targets.size();
    MaliciousProfiles out(w.rows());
    std::vector<Index> cand;
    for (std::size_t m = 0; m < w.rows(); ++m) {
        cand.clear();
        for (Index i = 0; i < w.cols(); ++i)
            if (w(m, i) > 0.0 && !contains(targets, i)) cand.push_back(i);
        const std::size_t take = std::min(slots, cand.size());
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                          [&](Index a, Index b) { return w(m, a) > w(m, b) || (w(m, a) == w(m, b) && a < b); });
        cand.resize(take);
        cand.insert(cand.end(), targets.begin(), targets.end());
        std::sort(cand.begin(), cand.end());
        out[m] = cand;
    }
    return out;
}

ClearResult clear_attack(const InteractionDataset& ds, const ModelConfig& victim, const AttackConfig& config,
                         const AttackBudget& budget) {
    config.validate();
    victim.validate();
    if (budget.target_items.empty()) throw InputError("CLeaR needs at least one target item");
    ClearResult res;
    res.profile = targets_only_profile(budget, ds.n_items());
    const auto targets = sorted_targets(budget);
    const auto train = ds.train_items_by_user();
    std::vector<Index> users(ds.n_users());
    std::iota(users.begin(), users.end(), Index{0});

    ModelState state = init_state(victim, ds.n_users() + budget.n_malicious, ds.n_items());
    auto rng = make_rng(config.seed, {0xc1ea7});
    double best = -1.0;
    std::size_t stale = 0;
    for (std::size_t round = 1; round <= config.rounds; ++round) {
        continue_training(state, ds, &res.profile.discretized, config.inner_epochs);
        const auto tables = final_tables(state, ds, &res.profile.discretized);
        const auto lists = recommend_topk(tables.users, tables.items, train, config.k, users);
        RoundTrace tr;
        tr.round = round;
        tr.hr_at_k = hit_ratio_at_k(lists, users, targets, train);

        const auto st = outer_ascent(ds, state, res.profile.weights, targets, config, rng);
        res.profile.discretized = greedy_discretize(res.profile.weights, budget);
        tr.dispersion = st.last.dispersion;
        tr.rank = st.last.rank;
        tr.steps = st.steps;
        tr.accepted = st.accepted;
        res.trace.push_back(tr);

        if (tr.hr_at_k > best) {
            best = tr.hr_at_k;
            stale = 0;
        } else if (config.patience > 0 && ++stale >= config.patience) {
            break;
        }
    }
    return res;
}

json profile_to_json(const MaliciousProfiles& p) {
    json j = json::object();
    for (std::size_t m = 0; m < p.size(); ++m) j[std::to_string(m)] = p[m];
    return j;
}

MaliciousProfiles profile_from_json(const json& j, std::size_t n_items) {
    if (!j.is_object()) throw InputError("profile JSON must be an object");
    MaliciousProfiles out(j.size());
    try {
        for (const auto& [key, v] : j.items()) {
            std::size_t pos = 0;
            const auto m = std::stoull(key, &pos);
            if (pos != key.size() || m >= out.size()) throw InputError("profile key '" + key + "' is not a valid index");
            out[m] = v.get<std::vector<Index>>();
            for (Index i : out[m])
                if (i >= n_items) throw InputError("profile item out of range");
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("profile JSON: ") + e.what());
    } catch (const std::logic_error&) {
        throw InputError("profile JSON keys must be malicious user indices");
    }
    return out;
}

namespace {

std::filesystem::path sidecar_path(std::filesystem::path p) { return p.replace_extension(".w.bin"); }

constexpr char kWeightsMagic[4] = {'R', 'P', 'W', '1'};

}  // namespace

void write_weights(const Matrix& w, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    const std::uint64_t dims[2] = {w.rows(), w.cols()};
    out.write(kWeightsMagic, 4);
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    out.write(reinterpret_cast<const char*>(w.data().data()), static_cast<std::streamsize>(w.data().size() * sizeof(double)));
    if (!out) throw InputError("failed writing " + path.string());
}

Matrix read_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read " + path.string());
    char magic[4];
    std::uint64_t dims[2];
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(dims), sizeof dims);
    if (!in || std::memcmp(magic, kWeightsMagic, 4) != 0) throw InputError(path.string() + ": not a weight sidecar");
    Matrix w(dims[0], dims[1]);
    in.read(reinterpret_cast<char*>(w.data().data()), static_cast<std::streamsize>(w.data().size() * sizeof(double)));
    if (!in) throw InputError(path.string() + ": truncated weight sidecar");
    return w;
}

void save_profile(const MaliciousProfile& p, const std::filesystem::path& json_path) {
    std::ofstream out(json_path);
    if (!out) throw InputError("cannot write " + json_path.string());
    out << profile_to_json(p.discretized).dump(2) << '\n';
    if (!p.weights.empty()) write_weights(p.weights, sidecar_path(json_path));
}

MaliciousProfile load_profile(const std::filesystem::path& json_path, const AttackBudget& budget, std::size_t n_items) {
    std::ifstream in(json_path);
    if (!in) throw InputError("cannot read " + json_path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw InputError(json_path.string() + ": " + e.what());
    }
    MaliciousProfile p = profile_from_sets(budget, n_items, profile_from_json(j, n_items));
    if (std::filesystem::exists(sidecar_path(json_path))) p.weights = read_weights(sidecar_path(json_path));
    p.validate(n_items);
    return p;
}

}  // namespace recpoison
