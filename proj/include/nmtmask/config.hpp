#pragma once

// Flat key=value run configuration with schema validation: every key is
// checked against the known set before any work starts; unknown keys are
// rejected outright.

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nmtmask/common.hpp"
#include "nmtmask/corpus.hpp"

namespace nmtmask {

struct RunConfig {
    std::uint64_t seed = 42;  // global; per-module seeds derive from it unless set

    std::string corpus_path;
    std::optional<std::uint64_t> corpus_max_pairs;
    SplitRatios split_ratios{0.8, 0.1, 0.1};
    std::optional<std::uint64_t> corpus_seed;

    std::string embeddings_path;
    int embeddings_dim = 0;
    double graph_threshold = 0.79;

    int hidden_dim = 128;
    std::optional<int> align_dim;  // defaults to 2 * hidden_dim
    double train_lr = 0.05;
    int train_epochs = 10;
    std::optional<std::uint64_t> train_seed;
    double train_grad_clip = 5.0;

    double q_alpha = 1e-3;
    int q_horizon = 4;
    double q_epsilon0 = 0.9;
    int q_episodes = 2000;
    double q_bonus = 0.25;
    std::optional<std::uint64_t> q_seed;

    std::string out_dir = "out";

    int resolved_align_dim() const { return align_dim ? *align_dim : 2 * hidden_dim; }
    std::uint64_t resolved_corpus_seed() const {
        return corpus_seed ? *corpus_seed : derive_seed(seed, "corpus");
    }
    std::uint64_t resolved_train_seed() const {
        return train_seed ? *train_seed : derive_seed(seed, "train");
    }
    std::uint64_t resolved_q_seed() const {
        return q_seed ? *q_seed : derive_seed(seed, "q");
    }

    void set(const std::string& key, const std::string& value);
    static RunConfig load(const std::string& path);
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::string unquote(std::string v) {
    if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                          (v.front() == '\'' && v.back() == '\'')))
        return v.substr(1, v.size() - 2);
    return v;
}

template <class T>
T parse_num(const std::string& key, const std::string& value) {
    std::istringstream ss(value);
    T out;
    std::string rest;
    if (!(ss >> out) || (ss >> rest))
        throw ConfigError("config key '" + key + "': cannot parse value '" + value + "'");
    return out;
}

inline SplitRatios parse_ratios(const std::string& key, const std::string& value) {
    std::string v = value;
    for (char& c : v)
        if (c == ',') c = ' ';
    std::istringstream ss(v);
    SplitRatios r{};
    std::string rest;
    if (!(ss >> r.train >> r.val >> r.test) || (ss >> rest))
        throw ConfigError("config key '" + key + "': expected three fractions, got '" +
                          value + "'");
    return r;
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& raw) {
    const std::string value = detail::unquote(detail::trim(raw));
    auto require = [&](bool ok, const std::string& what) {
        if (!ok) throw ConfigError("config key '" + key + "': " + what);
    };
    if (key == "seed") {
        seed = detail::parse_num<std::uint64_t>(key, value);
    } else if (key == "corpus.path") {
        corpus_path = value;
    } else if (key == "corpus.max_pairs") {
        corpus_max_pairs = detail::parse_num<std::uint64_t>(key, value);
        require(*corpus_max_pairs >= 1, "must be >= 1");
    } else if (key == "corpus.split_ratios") {
        split_ratios = detail::parse_ratios(key, value);
    } else if (key == "corpus.seed") {
        corpus_seed = detail::parse_num<std::uint64_t>(key, value);
    } else if (key == "embeddings.path") {
        embeddings_path = value;
    } else if (key == "embeddings.dim") {
        embeddings_dim = detail::parse_num<int>(key, value);
        require(embeddings_dim >= 1, "must be >= 1");
    } else if (key == "graph.threshold") {
        graph_threshold = detail::parse_num<double>(key, value);
        require(graph_threshold >= -1.0 && graph_threshold <= 1.0, "must lie in [-1,1]");
    } else if (key == "model.hidden_dim") {
        hidden_dim = detail::parse_num<int>(key, value);
        require(hidden_dim >= 1, "must be >= 1");
    } else if (key == "model.align_dim") {
        align_dim = detail::parse_num<int>(key, value);
        require(*align_dim >= 1, "must be >= 1");
    } else if (key == "train.lr") {
        train_lr = detail::parse_num<double>(key, value);
        require(train_lr >= 0.0, "must be >= 0");
    } else if (key == "train.epochs") {
        train_epochs = detail::parse_num<int>(key, value);
        require(train_epochs >= 0, "must be >= 0");
    } else if (key == "train.seed") {
        train_seed = detail::parse_num<std::uint64_t>(key, value);
    } else if (key == "train.grad_clip") {
        train_grad_clip = detail::parse_num<double>(key, value);
        require(train_grad_clip >= 0.0, "must be >= 0");
    } else if (key == "q.alpha") {
        q_alpha = detail::parse_num<double>(key, value);
        require(q_alpha > 0.0 && q_alpha <= 1.0, "must lie in (0,1]");
    } else if (key == "q.horizon") {
        q_horizon = detail::parse_num<int>(key, value);
        require(q_horizon >= 1, "must be >= 1");
    } else if (key == "q.epsilon0") {
        q_epsilon0 = detail::parse_num<double>(key, value);
        require(q_epsilon0 >= 0.0 && q_epsilon0 <= 1.0, "must lie in [0,1]");
    } else if (key == "q.episodes") {
        q_episodes = detail::parse_num<int>(key, value);
        require(q_episodes >= 0, "must be >= 0");
    } else if (key == "q.bonus") {
        q_bonus = detail::parse_num<double>(key, value);
        require(q_bonus >= 0.0, "must be >= 0");
    } else if (key == "q.seed") {
        q_seed = detail::parse_num<std::uint64_t>(key, value);
    } else if (key == "out.dir") {
        out_dir = value;
    } else {
        throw ConfigError("unknown config key: '" + key + "'");
    }
}

inline RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::string t = detail::trim(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected 'key = value'");
        std::string key = detail::trim(t.substr(0, eq));
        std::string value = t.substr(eq + 1);
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        cfg.set(key, value);
    }
    return cfg;
}

}  // namespace nmtmask
