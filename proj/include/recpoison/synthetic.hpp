#pragma once

#include <cstddef>
#include <cstdint>

#include "recpoison/data.hpp"

namespace recpoison {

// Latent-factor generator with power-law item popularity. Users prefer items
// near them in a small latent space; item exposure follows rank^-exponent.
struct SyntheticSpec {
    std::size_t n_users = 300;
    std::size_t n_items = 500;
    std::size_t latent_dim = 8;
    double mean_interactions = 20.0;
    std::size_t min_interactions = 5;
    double popularity_exponent = 0.9;
    double affinity = 8.0;  // weight of the latent preference term
    std::uint64_t seed = 2024;
};

// Unsplit dataset; user ids "u<k>", item ids "i<k>".
InteractionDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace recpoison
