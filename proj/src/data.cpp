#include "recpoison/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "recpoison/error.hpp"
#include "recpoison/rng.hpp"

namespace recpoison {

namespace fs = std::filesystem;

Index IdMap::intern(const std::string& id) {
    auto [it, inserted] = index_.try_emplace(id, static_cast<Index>(ids_.size()));
    if (inserted) ids_.push_back(id);
    return it->second;
}

Index IdMap::at(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw InputError("unknown id '" + id + "'");
    return it->second;
}

std::vector<std::vector<Index>> InteractionDataset::train_items_by_user() const {
    std::vector<std::vector<Index>> out(n_users());
    for (const auto& x : train) out[x.user].push_back(x.item);
    for (auto& v : out) std::sort(v.begin(), v.end());
    return out;
}

std::vector<std::vector<Index>> InteractionDataset::test_items_by_user() const {
    std::vector<std::vector<Index>> out(n_users());
    for (const auto& x : test) out[x.user].push_back(x.item);
    for (auto& v : out) std::sort(v.begin(), v.end());
    return out;
}

void InteractionDataset::recompute_popularity() {
    item_popularity.assign(n_items(), 0);
    for (const auto& x : train) {
        if (x.item >= n_items()) throw InputError("interaction index out of range");
        ++item_popularity[x.item];
    }
}

void InteractionDataset::validate() const {
    std::set<Interaction> seen;
    for (const auto* split : {&train, &valid, &test}) {
        for (const auto& x : *split) {
            if (x.user >= n_users() || x.item >= n_items())
                throw InputError("interaction index out of range");
            if (!seen.insert(x).second) throw InputError("splits are not disjoint");
        }
    }
    if (item_popularity.size() != n_items()) throw InputError("popularity table size mismatch");
    std::size_t total = std::accumulate(item_popularity.begin(), item_popularity.end(), std::size_t{0});
    if (total != train.size()) throw InputError("popularity does not sum to train size");
}

namespace {

std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> fields;
    if (sep == ' ') {
        std::istringstream is(line);
        std::string f;
        while (is >> f) fields.push_back(f);
        return fields;
    }
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

InteractionDataset parse_interactions(const std::string& text, const std::string& source) {
    InteractionDataset ds;
    std::set<Interaction> seen;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    char sep = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (sep == 0) sep = t.find('\t') != std::string::npos ? '\t' : t.find(',') != std::string::npos ? ',' : ' ';
        auto fields = split_fields(t, sep);
        if (fields.size() < 2 || trim(fields[0]).empty() || trim(fields[1]).empty())
            throw InputError(source + ":" + std::to_string(line_no) + ": expected at least 2 fields (user, item)");
        Interaction x{ds.users.intern(trim(fields[0])), ds.items.intern(trim(fields[1]))};
        if (seen.insert(x).second) ds.train.push_back(x);
    }
    if (ds.train.empty()) throw InputError(source + ": no interactions");
    std::sort(ds.train.begin(), ds.train.end());
    ds.recompute_popularity();
    return ds;
}

InteractionDataset load_interactions(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_interactions(buf.str(), path.string());
}

InteractionDataset split_dataset(const InteractionDataset& ds, SplitRatios ratios, std::uint64_t seed) {
    if (ratios.train < 0 || ratios.valid < 0 || ratios.test < 0) throw InputError("split ratio must be non-negative");
    if (std::abs(ratios.train + ratios.valid + ratios.test - 1.0) > 1e-9) throw InputError("split ratios must sum to 1");

    std::vector<std::vector<Index>> by_user(ds.n_users());
    std::size_t n = 0;
    for (const auto* split : {&ds.train, &ds.valid, &ds.test}) {
        for (const auto& x : *split) {
            by_user[x.user].push_back(x.item);
            ++n;
        }
    }
    if (n == 0) throw InputError("cannot split an empty dataset");

    const auto target_valid = static_cast<std::size_t>(std::llround(ratios.valid * static_cast<double>(n)));
    const auto target_test = static_cast<std::size_t>(std::llround(ratios.test * static_cast<double>(n)));

    const std::size_t nu = ds.n_users();
    std::vector<std::size_t> n_valid(nu, 0), n_test(nu, 0);
    std::vector<double> frac_valid(nu, -1.0), frac_test(nu, -1.0);
    std::size_t sum_valid = 0, sum_test = 0;
    for (std::size_t u = 0; u < nu; ++u) {
        auto& items = by_user[u];
        std::sort(items.begin(), items.end());
        auto rng = make_rng(seed, {u});
        std::shuffle(items.begin(), items.end(), rng);
        const std::size_t m = items.size();
        if (m < 3) continue;  // cold users keep everything in train
        const double sv = ratios.valid * static_cast<double>(m);
        const double st = ratios.test * static_cast<double>(m);
        n_valid[u] = static_cast<std::size_t>(std::floor(sv + 1e-9));
        n_test[u] = static_cast<std::size_t>(std::floor(st + 1e-9));
        while (n_valid[u] + n_test[u] >= m) {  // keep at least one train item
            if (n_test[u] >= n_valid[u] && n_test[u] > 0) --n_test[u];
            else --n_valid[u];
        }
        frac_valid[u] = sv - static_cast<double>(n_valid[u]);
        frac_test[u] = st - static_cast<double>(n_test[u]);
        sum_valid += n_valid[u];
        sum_test += n_test[u];
    }

    // Largest-remainder top-up so the global split sizes match the ratios.
    auto top_up = [&](std::vector<std::size_t>& counts, const std::vector<double>& frac, std::size_t have, std::size_t want) {
        std::vector<std::size_t> order;
        for (std::size_t u = 0; u < nu; ++u)
            if (frac[u] > 0.0) order.push_back(u);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
        for (std::size_t u : order) {
            if (have >= want) break;
            if (n_valid[u] + n_test[u] + 1 >= by_user[u].size()) continue;
            ++counts[u];
            ++have;
        }
    };
    top_up(n_valid, frac_valid, sum_valid, target_valid);
    top_up(n_test, frac_test, sum_test, target_test);

    InteractionDataset out;
    out.users = ds.users;
    out.items = ds.items;
    for (std::size_t u = 0; u < nu; ++u) {
        const auto& items = by_user[u];
        for (std::size_t k = 0; k < items.size(); ++k) {
            Interaction x{static_cast<Index>(u), items[k]};
            if (k < n_valid[u]) out.valid.push_back(x);
            else if (k < n_valid[u] + n_test[u]) out.test.push_back(x);
            else out.train.push_back(x);
        }
    }
    for (auto* split : {&out.train, &out.valid, &out.test}) std::sort(split->begin(), split->end());
    out.recompute_popularity();
    return out;
}

std::vector<Index> cold_item_pool(const InteractionDataset& ds) {
    const std::size_t ni = ds.n_items();
    std::vector<Index> ranked(ni);
    std::iota(ranked.begin(), ranked.end(), Index{0});
    std::stable_sort(ranked.begin(), ranked.end(), [&](Index a, Index b) {
        return ds.item_popularity[a] > ds.item_popularity[b];
    });
    const auto bottom = static_cast<std::size_t>(std::floor(0.8 * static_cast<double>(ni) + 1e-9));
    std::vector<Index> pool(ranked.end() - static_cast<std::ptrdiff_t>(bottom), ranked.end());
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::vector<Index> select_target_items(const InteractionDataset& ds, std::size_t n, std::uint64_t seed) {
    auto pool = cold_item_pool(ds);
    if (n > pool.size())
        throw InputError("requested " + std::to_string(n) + " targets but the cold pool has " + std::to_string(pool.size()));
    auto rng = make_rng(seed, {0x7a67});
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(n);
    std::sort(pool.begin(), pool.end());
    return pool;
}

AttackBudget attack_budget(const InteractionDataset& ds, double user_fraction, std::vector<Index> targets) {
    if (!(user_fraction > 0.0)) throw InputError("attack user fraction must be > 0");
    if (ds.train.empty() || ds.n_users() == 0) throw InputError("attack budget needs train interactions");
    std::sort(targets.begin(), targets.end());
    targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
    AttackBudget b;
    b.n_malicious = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(user_fraction * static_cast<double>(ds.n_users()) - 1e-9)));
    b.per_user_budget = std::max(ds.train.size() / ds.n_users(), targets.size());
    b.target_items = std::move(targets);
    return b;
}

namespace {

void write_split(const fs::path& p, const std::vector<Interaction>& xs) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write " + p.string());
    out << "user,item\n";
    for (const auto& x : xs) out << x.user << ',' << x.item << '\n';
}

std::vector<Interaction> read_split(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw InputError("cannot open " + p.string());
    std::vector<Interaction> xs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 || trim(line).empty()) continue;
        auto f = split_fields(trim(line), ',');
        try {
            if (f.size() != 2) throw std::invalid_argument("fields");
            xs.push_back({static_cast<Index>(std::stoul(f[0])), static_cast<Index>(std::stoul(f[1]))});
        } catch (const std::exception&) {
            throw InputError(p.string() + ":" + std::to_string(line_no) + ": malformed index pair");
        }
    }
    return xs;
}

}  // namespace

void save_dataset(const InteractionDataset& ds, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create " + dir.string());
    nlohmann::json j;
    j["users"] = ds.users.ids();
    j["items"] = ds.items.ids();
    std::ofstream out(dir / "mapping.json", std::ios::binary);
    if (!out) throw InputError("cannot write " + (dir / "mapping.json").string());
    out << j.dump(1) << '\n';
    write_split(dir / "train.csv", ds.train);
    write_split(dir / "valid.csv", ds.valid);
    write_split(dir / "test.csv", ds.test);
}

InteractionDataset load_dataset(const fs::path& dir) {
    std::ifstream in(dir / "mapping.json");
    if (!in) throw InputError("dataset directory " + dir.string() + " has no mapping.json");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("mapping.json: " + std::string(e.what()));
    }
    InteractionDataset ds;
    for (const auto& id : j.at("users")) ds.users.intern(id.get<std::string>());
    for (const auto& id : j.at("items")) ds.items.intern(id.get<std::string>());
    ds.train = read_split(dir / "train.csv");
    ds.valid = read_split(dir / "valid.csv");
    ds.test = read_split(dir / "test.csv");
    ds.recompute_popularity();
    ds.validate();
    return ds;
}

DatasetStats dataset_stats(const InteractionDataset& ds) {
    DatasetStats s;
    s.users = ds.n_users();
    s.items = ds.n_items();
    s.interactions = ds.train.size() + ds.valid.size() + ds.test.size();
    if (s.users > 0 && s.items > 0)
        s.density = static_cast<double>(s.interactions) / (static_cast<double>(s.users) * static_cast<double>(s.items));
    return s;
}

}  // namespace recpoison
