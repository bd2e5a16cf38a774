#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "recpoison/data.hpp"
#include "recpoison/graph.hpp"
#include "recpoison/matrix.hpp"

namespace recpoison {

enum class EncoderKind { MF, LightGCN };
enum class ClKind { None, SGL, SimGCL, XSimGCL };

std::string to_string(EncoderKind k);
std::string to_string(ClKind k);
EncoderKind parse_encoder(const std::string& s);
ClKind parse_cl(const std::string& s);

struct ModelConfig {
    EncoderKind encoder = EncoderKind::LightGCN;
    std::size_t n_layers = 2;
    ClKind cl = ClKind::None;
    std::size_t dim = 64;
    double tau = 0.2;
    double omega = 0.1;
    double lr = 0.001;
    std::size_t batch_size = 1024;
    std::size_t epochs = 100;
    double sgl_drop = 0.1;       // SGL edge-drop rate
    double simgcl_eps = 0.1;     // SimGCL / XSimGCL noise magnitude
    std::size_t xsimgcl_layer = 1;
    std::uint64_t seed = 1;

    // Propagation depth actually used (0 for MF).
    std::size_t layers() const { return encoder == EncoderKind::MF ? 0 : n_layers; }
    bool contrastive() const { return cl != ClKind::None && omega > 0.0; }
    // Short model tag: "MF", "LightGCN", "SGL", "SimGCL", "XSimGCL".
    std::string tag() const;
    void validate() const;
};

nlohmann::json to_json(const ModelConfig& c);
// Unknown keys are rejected; missing keys keep the defaults of `base`.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

struct AdamState {
    Matrix m_users, v_users, m_items, v_items;
    std::size_t step = 0;
};

struct ModelState {
    ModelConfig config;
    Matrix user_embeddings;  // base table, genuine users then malicious users
    Matrix item_embeddings;
    AdamState adam;
    std::size_t epochs_done = 0;

    std::size_t n_users() const { return user_embeddings.rows(); }
    std::size_t n_items() const { return item_embeddings.rows(); }
    Matrix stacked() const { return vstack(user_embeddings, item_embeddings); }
};

struct EpochStats {
    std::size_t epoch = 0;
    double bpr = 0.0;
    double cl = 0.0;
};

using MaliciousProfiles = std::vector<std::vector<Index>>;

// Fresh state with Xavier-uniform embeddings for n_users x n_items.
ModelState init_state(const ModelConfig& config, std::size_t n_users, std::size_t n_items);

// Trains from scratch for config.epochs on train split plus malicious profiles.
ModelState train(const InteractionDataset& ds, const ModelConfig& config, const MaliciousProfiles* malicious = nullptr,
                 std::vector<EpochStats>* log = nullptr);

// Runs `epochs` more epochs from the given state (optimizer state included).
void continue_training(ModelState& state, const InteractionDataset& ds, const MaliciousProfiles* malicious,
                       std::size_t epochs, std::vector<EpochStats>* log = nullptr);

// Clean forward pass: layer-mean propagation (MF returns the base tables).
Matrix final_embeddings(const ModelState& state, const PropagationGraph& graph);

// Two contrastive views with unit-norm rows. SimGCL/XSimGCL add per-layer
// noise; SGL propagates over two edge-dropped graphs.
struct ViewPair {
    Matrix view1;
    Matrix view2;
};
ViewPair make_views(const ModelState& state, const PropagationGraph& graph, std::uint64_t seed);

// Layers with SimGCL-style noise: E_l = A E_{l-1} + eps * sign(E_l) * unit(U[0,1]^d).
std::vector<Matrix> noisy_layers(const PropagationGraph& graph, const Matrix& base, std::size_t n_layers, double eps,
                                 std::uint64_t seed);

using RecommendationList = std::vector<std::vector<Index>>;

// Top-K items per requested user by score, excluding each user's train items;
// ties go to the lower item index.
RecommendationList recommend_topk(const Matrix& user_final, const Matrix& item_final,
                                  const std::vector<std::vector<Index>>& train_items, std::size_t k,
                                  std::span<const Index> users);

void save_checkpoint(const ModelState& state, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);

}  // namespace recpoison
