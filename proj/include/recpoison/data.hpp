#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace recpoison {

using Index = std::uint32_t;

struct Interaction {
    Index user = 0;
    Index item = 0;
    friend bool operator==(const Interaction&, const Interaction&) = default;
    friend auto operator<=>(const Interaction&, const Interaction&) = default;
};

// Bijection between external string ids and dense indices (first-appearance order).
class IdMap {
public:
    Index intern(const std::string& id);
    Index at(const std::string& id) const;
    bool contains(const std::string& id) const { return index_.count(id) != 0; }
    const std::string& external(Index i) const { return ids_.at(i); }
    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }

    friend bool operator==(const IdMap& a, const IdMap& b) { return a.ids_ == b.ids_; }

private:
    std::vector<std::string> ids_;
    std::unordered_map<std::string, Index> index_;
};

// Implicit-feedback dataset with dense indices. An unsplit dataset keeps every
// interaction in `train`.
struct InteractionDataset {
    IdMap users;
    IdMap items;
    std::vector<Interaction> train;
    std::vector<Interaction> valid;
    std::vector<Interaction> test;
    std::vector<std::size_t> item_popularity;  // train counts per item

    std::size_t n_users() const { return users.size(); }
    std::size_t n_items() const { return items.size(); }

    // Per-user sorted train item lists.
    std::vector<std::vector<Index>> train_items_by_user() const;
    std::vector<std::vector<Index>> test_items_by_user() const;

    void recompute_popularity();

    // Throws InputError when a split invariant is broken.
    void validate() const;
};

struct SplitRatios {
    double train = 0.7;
    double valid = 0.1;
    double test = 0.2;
};

struct AttackBudget {
    std::size_t n_malicious = 1;
    std::size_t per_user_budget = 0;
    std::vector<Index> target_items;  // sorted
};

// Reads "user<sep>item[<sep>...]" lines. The separator is detected from the
// first non-empty line: tab, then comma, then any whitespace.
InteractionDataset load_interactions(const std::filesystem::path& path);
InteractionDataset parse_interactions(const std::string& text, const std::string& source = "<memory>");

InteractionDataset split_dataset(const InteractionDataset& ds, SplitRatios ratios, std::uint64_t seed);

// Items outside the top-20% popularity group, ranked by (count desc, index asc).
std::vector<Index> cold_item_pool(const InteractionDataset& ds);
std::vector<Index> select_target_items(const InteractionDataset& ds, std::size_t n, std::uint64_t seed);

AttackBudget attack_budget(const InteractionDataset& ds, double user_fraction, std::vector<Index> targets);

// Persisted layout: mapping.json, train.csv, valid.csv, test.csv.
void save_dataset(const InteractionDataset& ds, const std::filesystem::path& dir);
InteractionDataset load_dataset(const std::filesystem::path& dir);

struct DatasetStats {
    std::size_t users = 0;
    std::size_t items = 0;
    std::size_t interactions = 0;
    double density = 0.0;
};
DatasetStats dataset_stats(const InteractionDataset& ds);

}  // namespace recpoison
