#include "recpoison/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "recpoison/error.hpp"
#include "recpoison/losses.hpp"
#include "recpoison/rng.hpp"

namespace recpoison {

using nlohmann::json;

std::string to_string(EncoderKind k) { return k == EncoderKind::MF ? "MF" : "LightGCN"; }

std::string to_string(ClKind k) {
    switch (k) {
        case ClKind::None: return "none";
        case ClKind::SGL: return "sgl";
        case ClKind::SimGCL: return "simgcl";
        case ClKind::XSimGCL: return "xsimgcl";
    }
    return "none";
}

EncoderKind parse_encoder(const std::string& s) {
    if (s == "MF" || s == "mf") return EncoderKind::MF;
    if (s == "LightGCN" || s == "lightgcn") return EncoderKind::LightGCN;
    throw InputError("unknown encoder '" + s + "' (expected MF or LightGCN)");
}

ClKind parse_cl(const std::string& s) {
    if (s == "none" || s == "None") return ClKind::None;
    if (s == "sgl" || s == "SGL") return ClKind::SGL;
    if (s == "simgcl" || s == "SimGCL") return ClKind::SimGCL;
    if (s == "xsimgcl" || s == "XSimGCL") return ClKind::XSimGCL;
    throw InputError("unknown contrastive kind '" + s + "' (expected none, sgl, simgcl, xsimgcl)");
}

std::string ModelConfig::tag() const {
    switch (cl) {
        case ClKind::SGL: return "SGL";
        case ClKind::SimGCL: return "SimGCL";
        case ClKind::XSimGCL: return "XSimGCL";
        case ClKind::None: break;
    }
    return to_string(encoder);
}

void ModelConfig::validate() const {
    if (dim == 0) throw InputError("model.dim must be > 0");
    if (!(tau > 0.0)) throw InputError("model.tau must be > 0");
    if (!(omega >= 0.0)) throw InputError("model.omega must be >= 0");
    if (!(lr > 0.0)) throw InputError("model.lr must be > 0");
    if (batch_size == 0) throw InputError("model.batch_size must be > 0");
    if (!(sgl_drop >= 0.0 && sgl_drop < 1.0)) throw InputError("model.sgl_drop must be in [0,1)");
    if (!(simgcl_eps >= 0.0)) throw InputError("model.simgcl_eps must be >= 0");
    if (cl != ClKind::None && layers() == 0) throw InputError("contrastive views need a propagation encoder with >= 1 layer");
    if (cl == ClKind::XSimGCL && (xsimgcl_layer == 0 || xsimgcl_layer > layers()))
        throw InputError("model.xsimgcl_layer must be in [1, n_layers]");
}

json to_json(const ModelConfig& c) {
    return json{{"encoder", to_string(c.encoder)}, {"n_layers", c.n_layers},   {"cl", to_string(c.cl)},
                {"dim", c.dim},                    {"tau", c.tau},             {"omega", c.omega},
                {"lr", c.lr},                      {"batch_size", c.batch_size}, {"epochs", c.epochs},
                {"sgl_drop", c.sgl_drop},          {"simgcl_eps", c.simgcl_eps}, {"xsimgcl_layer", c.xsimgcl_layer},
                {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& j, ModelConfig c) {
    if (!j.is_object()) throw InputError("model config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "encoder") c.encoder = parse_encoder(v.get<std::string>());
            else if (key == "n_layers") c.n_layers = v.get<std::size_t>();
            else if (key == "cl") c.cl = parse_cl(v.get<std::string>());
            else if (key == "dim") c.dim = v.get<std::size_t>();
            else if (key == "tau") c.tau = v.get<double>();
            else if (key == "omega") c.omega = v.get<double>();
            else if (key == "lr") c.lr = v.get<double>();
            else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
            else if (key == "epochs") c.epochs = v.get<std::size_t>();
            else if (key == "sgl_drop") c.sgl_drop = v.get<double>();
            else if (key == "simgcl_eps") c.simgcl_eps = v.get<double>();
            else if (key == "xsimgcl_layer") c.xsimgcl_layer = v.get<std::size_t>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else throw InputError("unknown model config key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

ModelState init_state(const ModelConfig& config, std::size_t n_users, std::size_t n_items) {
    config.validate();
    ModelState s;
    s.config = config;
    auto rng = make_rng(config.seed, {0x1417});
    auto xavier = [&](std::size_t rows) {
        Matrix m(rows, config.dim);
        const double bound = std::sqrt(6.0 / static_cast<double>(rows + config.dim));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : m.data()) v = dist(rng);
        return m;
    };
    s.user_embeddings = xavier(n_users);
    s.item_embeddings = xavier(n_items);
    s.adam = {Matrix(n_users, config.dim), Matrix(n_users, config.dim), Matrix(n_items, config.dim),
              Matrix(n_items, config.dim), 0};
    return s;
}

std::vector<Matrix> noisy_layers(const PropagationGraph& graph, const Matrix& base, std::size_t n_layers, double eps,
                                 std::uint64_t seed) {
    if (base.rows() != graph.n_nodes()) throw InputError("propagation: embedding rows do not match graph nodes");
    auto rng = make_rng(seed, {0x4015e});
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Matrix> layers;
    layers.reserve(n_layers + 1);
    layers.push_back(base);
    const std::size_t d = base.cols();
    std::vector<double> noise(d);
    for (std::size_t l = 0; l < n_layers; ++l) {
        Matrix next = graph.multiply(layers.back());
        if (eps > 0.0) {
            for (std::size_t r = 0; r < next.rows(); ++r) {
                double norm = 0.0;
                for (double& v : noise) {
                    v = unif(rng);
                    norm += v * v;
                }
                norm = std::sqrt(norm);
                auto row = next.row(r);
                for (std::size_t k = 0; k < d; ++k) {
                    const double sign = row[k] > 0 ? 1.0 : (row[k] < 0 ? -1.0 : 0.0);
                    if (norm > 0) row[k] += eps * sign * noise[k] / norm;
                }
            }
        }
        layers.push_back(std::move(next));
    }
    return layers;
}

Matrix final_embeddings(const ModelState& state, const PropagationGraph& graph) {
    return propagate(graph, state.stacked(), state.config.layers());
}

namespace {

struct TrainingSet {
    PropagationGraph graph;
    std::vector<Interaction> edges;
    std::vector<std::vector<Index>> positives;  // sorted, per user row
};

TrainingSet make_training_set(const InteractionDataset& ds, const MaliciousProfiles* malicious) {
    TrainingSet t;
    const std::size_t n_mal = malicious ? malicious->size() : 0;
    t.graph = malicious ? build_graph(ds, *malicious) : build_graph(ds);
    t.edges = ds.train;
    t.positives = ds.train_items_by_user();
    t.positives.resize(ds.n_users() + n_mal);
    for (std::size_t m = 0; m < n_mal; ++m) {
        auto items = (*malicious)[m];
        std::sort(items.begin(), items.end());
        items.erase(std::unique(items.begin(), items.end()), items.end());
        for (Index i : items) {
            if (i >= ds.n_items()) throw InputError("malicious profile item out of range");
            t.edges.push_back({static_cast<Index>(ds.n_users() + m), i});
        }
        t.positives[ds.n_users() + m] = std::move(items);
    }
    return t;
}

Index sample_negative(const std::vector<Index>& positives, std::size_t n_items, Rng& rng) {
    if (positives.size() >= n_items) throw InputError("user interacted with every item; no negative to sample");
    std::uniform_int_distribution<Index> dist(0, static_cast<Index>(n_items - 1));
    for (;;) {
        const Index j = dist(rng);
        if (!std::binary_search(positives.begin(), positives.end(), j)) return j;
    }
}

void adam_update(Matrix& param, Matrix& m, Matrix& v, const Matrix& grad, double lr, std::size_t step) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    auto& p = param.data();
    auto& mm = m.data();
    auto& vv = v.data();
    const auto& g = grad.data();
    for (std::size_t k = 0; k < p.size(); ++k) {
        mm[k] = b1 * mm[k] + (1.0 - b1) * g[k];
        vv[k] = b2 * vv[k] + (1.0 - b2) * g[k] * g[k];
        p[k] -= lr * (mm[k] / c1) / (std::sqrt(vv[k] / c2) + eps);
    }
}

EpochStats run_epoch(ModelState& state, const TrainingSet& ts, std::size_t epoch) {
    const ModelConfig& c = state.config;
    const std::size_t nu = state.n_users(), ni = state.n_items();
    const std::size_t L = c.layers();
    const bool use_cl = c.contrastive();

    auto rng = make_rng(c.seed, {epoch, 1});
    std::vector<std::size_t> order(ts.edges.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::shuffle(order.begin(), order.end(), rng);

    PropagationGraph sgl1, sgl2;
    if (use_cl && c.cl == ClKind::SGL) {
        auto aug = make_rng(c.seed, {epoch, 2});
        sgl1 = drop_edges(ts.graph, c.sgl_drop, aug);
        sgl2 = drop_edges(ts.graph, c.sgl_drop, aug);
    }

    EpochStats stats;
    stats.epoch = epoch;
    std::size_t n_batches = 0;
    std::vector<Triple> batch;
    std::vector<char> in_subset(nu + ni, 0);
    std::vector<std::size_t> subset;
    for (std::size_t start = 0; start < order.size(); start += c.batch_size, ++n_batches) {
        const std::size_t end = std::min(order.size(), start + c.batch_size);
        batch.clear();
        for (std::size_t k = start; k < end; ++k) {
            const auto& e = ts.edges[order[k]];
            batch.push_back({e.user, e.item, sample_negative(ts.positives[e.user], ni, rng)});
        }

        const Matrix base = state.stacked();
        const std::uint64_t noise_seed = mix64(c.seed ^ mix64(epoch * 1315423911ULL + n_batches));
        std::vector<Matrix> layers = (use_cl && c.cl == ClKind::XSimGCL)
                                         ? noisy_layers(ts.graph, base, L, c.simgcl_eps, noise_seed)
                                         : propagate_layers(ts.graph, base, L);
        const Matrix z = layer_mean(layers);
        const Matrix zu = slice_rows(z, 0, nu), zi = slice_rows(z, nu, ni);
        const double bpr = bpr_loss(zu, zi, batch);
        auto bg = bpr_gradient(zu, zi, batch);
        Matrix grad_z = vstack(bg.users, bg.items);

        double cl_loss = 0.0;
        Matrix grad_base;
        if (use_cl) {
            subset.clear();
            auto add = [&](std::size_t node) {
                if (!in_subset[node]) {
                    in_subset[node] = 1;
                    subset.push_back(node);
                }
            };
            for (const auto& t : batch) {
                add(t.user);
                add(nu + t.pos);
                add(nu + t.neg);
            }
            std::sort(subset.begin(), subset.end());
            for (std::size_t node : subset) in_subset[node] = 0;
            const double scale = c.omega / static_cast<double>(subset.size());

            switch (c.cl) {
                case ClKind::SGL: {
                    const Matrix v1 = propagate(sgl1, base, L), v2 = propagate(sgl2, base, L);
                    auto r = infonce_gradient(v1, v2, c.tau, subset);
                    cl_loss = r.loss / static_cast<double>(subset.size());
                    r.grad_view1 *= scale;
                    r.grad_view2 *= scale;
                    grad_base = backprop_mean(ts.graph, grad_z, L);
                    grad_base += backprop_mean(sgl1, r.grad_view1, L);
                    grad_base += backprop_mean(sgl2, r.grad_view2, L);
                    break;
                }
                case ClKind::SimGCL: {
                    const Matrix v1 = layer_mean(noisy_layers(ts.graph, base, L, c.simgcl_eps, noise_seed ^ 0xa1));
                    const Matrix v2 = layer_mean(noisy_layers(ts.graph, base, L, c.simgcl_eps, noise_seed ^ 0xb2));
                    auto r = infonce_gradient(v1, v2, c.tau, subset);
                    cl_loss = r.loss / static_cast<double>(subset.size());
                    grad_z += (r.grad_view1 *= scale);
                    grad_z += (r.grad_view2 *= scale);
                    grad_base = backprop_mean(ts.graph, grad_z, L);
                    break;
                }
                case ClKind::XSimGCL: {
                    auto r = infonce_gradient(z, layers[c.xsimgcl_layer], c.tau, subset);
                    cl_loss = r.loss / static_cast<double>(subset.size());
                    grad_z += (r.grad_view1 *= scale);
                    grad_z *= 1.0 / static_cast<double>(L + 1);
                    std::vector<Matrix> layer_grads(L + 1, grad_z);
                    layer_grads[c.xsimgcl_layer] += (r.grad_view2 *= scale);
                    grad_base = backprop_layers(ts.graph, layer_grads);
                    break;
                }
                case ClKind::None: break;
            }
        } else {
            grad_base = backprop_mean(ts.graph, grad_z, L);
        }

        if (!std::isfinite(bpr) || !std::isfinite(cl_loss))
            throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(n_batches) + " (bpr=" + std::to_string(bpr) +
                               ", cl=" + std::to_string(cl_loss) + ")");

        ++state.adam.step;
        const Matrix gu = slice_rows(grad_base, 0, nu), gi = slice_rows(grad_base, nu, ni);
        adam_update(state.user_embeddings, state.adam.m_users, state.adam.v_users, gu, c.lr, state.adam.step);
        adam_update(state.item_embeddings, state.adam.m_items, state.adam.v_items, gi, c.lr, state.adam.step);

        stats.bpr += bpr;
        stats.cl += cl_loss;
    }
    if (n_batches > 0) {
        stats.bpr /= static_cast<double>(n_batches);
        stats.cl /= static_cast<double>(n_batches);
    }
    return stats;
}

}  // namespace

void continue_training(ModelState& state, const InteractionDataset& ds, const MaliciousProfiles* malicious,
                       std::size_t epochs, std::vector<EpochStats>* log) {
    state.config.validate();
    const std::size_t n_mal = malicious ? malicious->size() : 0;
    if (state.n_users() != ds.n_users() + n_mal || state.n_items() != ds.n_items())
        throw InputError("model state shape does not match dataset plus malicious users");
    const TrainingSet ts = make_training_set(ds, malicious);
    for (std::size_t e = 0; e < epochs; ++e) {
        auto stats = run_epoch(state, ts, state.epochs_done);
        ++state.epochs_done;
        if (log) log->push_back(stats);
    }
}

ModelState train(const InteractionDataset& ds, const ModelConfig& config, const MaliciousProfiles* malicious,
                 std::vector<EpochStats>* log) {
    const std::size_t n_mal = malicious ? malicious->size() : 0;
    ModelState state = init_state(config, ds.n_users() + n_mal, ds.n_items());
    continue_training(state, ds, malicious, config.epochs, log);
    return state;
}

ViewPair make_views(const ModelState& state, const PropagationGraph& graph, std::uint64_t seed) {
    const ModelConfig& c = state.config;
    c.validate();
    const Matrix base = state.stacked();
    const std::size_t L = c.layers();
    ViewPair v;
    switch (c.cl) {
        case ClKind::None: throw InputError("make_views needs a contrastive model kind");
        case ClKind::SGL: {
            auto rng = make_rng(seed, {2});
            v.view1 = propagate(drop_edges(graph, c.sgl_drop, rng), base, L);
            v.view2 = propagate(drop_edges(graph, c.sgl_drop, rng), base, L);
            break;
        }
        case ClKind::SimGCL:
            v.view1 = layer_mean(noisy_layers(graph, base, L, c.simgcl_eps, seed ^ 0xa1));
            v.view2 = layer_mean(noisy_layers(graph, base, L, c.simgcl_eps, seed ^ 0xb2));
            break;
        case ClKind::XSimGCL: {
            auto layers = noisy_layers(graph, base, L, c.simgcl_eps, seed);
            v.view1 = layer_mean(layers);
            v.view2 = std::move(layers[c.xsimgcl_layer]);
            break;
        }
    }
    std::vector<std::size_t> all(v.view1.rows());
    for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
    v.view1 = normalize_rows(v.view1, all);
    v.view2 = normalize_rows(v.view2, all);
    return v;
}

RecommendationList recommend_topk(const Matrix& user_final, const Matrix& item_final,
                                  const std::vector<std::vector<Index>>& train_items, std::size_t k,
                                  std::span<const Index> users) {
    if (k == 0) throw InputError("K must be > 0");
    RecommendationList out;
    out.reserve(users.size());
    std::vector<std::pair<double, Index>> cand;
    for (Index u : users) {
        if (u >= user_final.rows()) throw InputError("recommend_topk: user out of range");
        static const std::vector<Index> none;
        const auto& seen = u < train_items.size() ? train_items[u] : none;
        cand.clear();
        const auto zu = user_final.row(u);
        for (Index i = 0; i < item_final.rows(); ++i) {
            if (std::binary_search(seen.begin(), seen.end(), i)) continue;
            cand.emplace_back(dot(zu, item_final.row(i)), i);
        }
        const std::size_t take = std::min(k, cand.size());
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                          [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
        std::vector<Index> list(take);
        for (std::size_t r = 0; r < take; ++r) list[r] = cand[r].second;
        out.push_back(std::move(list));
    }
    return out;
}

namespace {

json matrix_json(const Matrix& m) { return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}}; }

Matrix matrix_from_json(const json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != m.data().size()) throw InputError("checkpoint matrix size mismatch");
    m.data() = std::move(data);
    return m;
}

}  // namespace

void save_checkpoint(const ModelState& state, const std::filesystem::path& path) {
    json j;
    j["format"] = "recpoison-checkpoint-1";
    j["config"] = to_json(state.config);
    j["contrastive"] = state.config.contrastive();
    j["dim"] = state.config.dim;
    j["n_layers"] = state.config.layers();
    j["epochs_done"] = state.epochs_done;
    j["user_embeddings"] = matrix_json(state.user_embeddings);
    j["item_embeddings"] = matrix_json(state.item_embeddings);
    j["adam"] = json{{"step", state.adam.step},
                     {"m_users", matrix_json(state.adam.m_users)},
                     {"v_users", matrix_json(state.adam.v_users)},
                     {"m_items", matrix_json(state.adam.m_items)},
                     {"v_items", matrix_json(state.adam.v_items)}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write checkpoint " + path.string());
    out << j.dump() << '\n';
}

ModelState load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open checkpoint " + path.string());
    try {
        json j;
        in >> j;
        if (j.value("format", "") != "recpoison-checkpoint-1") throw InputError("unrecognized checkpoint format");
        ModelState s;
        s.config = model_config_from_json(j.at("config"));
        s.epochs_done = j.at("epochs_done").get<std::size_t>();
        s.user_embeddings = matrix_from_json(j.at("user_embeddings"));
        s.item_embeddings = matrix_from_json(j.at("item_embeddings"));
        const auto& a = j.at("adam");
        s.adam = {matrix_from_json(a.at("m_users")), matrix_from_json(a.at("v_users")), matrix_from_json(a.at("m_items")),
                  matrix_from_json(a.at("v_items")), a.at("step").get<std::size_t>()};
        if (!s.user_embeddings.all_finite() || !s.item_embeddings.all_finite())
            throw NumericError("checkpoint holds non-finite embeddings");
        return s;
    } catch (const json::exception& e) {
        throw InputError("checkpoint " + path.string() + ": " + e.what());
    }
}

}  // namespace recpoison
