#pragma once

// Pretrained word vectors: loading (word2vec text format), cosine queries,
// the thresholded similarity graph (the MDP transition structure), and
// nearest-word retrieval.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "nmtmask/common.hpp"
#include "nmtmask/corpus.hpp"

namespace nmtmask {

using Vec = Eigen::VectorXd;

struct EmbeddingTable {
    int dim = 0;
    std::vector<std::string> words;  // insertion (file) order; index = token id
    std::unordered_map<std::string, int> index;
    std::vector<Vec> vectors;

    bool contains(const std::string& w) const { return index.count(w) != 0; }
    const Vec& at(const std::string& w) const {
        auto it = index.find(w);
        if (it == index.end()) throw DomainError("no embedding for token: " + w);
        return vectors[it->second];
    }
    int size() const { return static_cast<int>(words.size()); }

    void insert(const std::string& w, Vec v) {
        if (contains(w)) return;  // duplicate rows: first one wins
        index.emplace(w, static_cast<int>(words.size()));
        words.push_back(w);
        vectors.push_back(std::move(v));
    }
};

struct EmbeddingLoadReport {
    size_t loaded = 0;
    std::vector<std::string> missing;   // vocab words absent from the file
    std::vector<std::string> zero_rows; // words whose row was the zero vector
};

inline EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab,
                                      int dim, EmbeddingLoadReport* report = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embeddings file: " + path);

    EmbeddingTable table;
    table.dim = dim;
    EmbeddingLoadReport local;
    std::string line;
    size_t lineno = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);

        if (first) {
            first = false;
            // Optional word2vec header: two integer fields `<count> <dim>`.
            std::istringstream probe(line);
            long long a, b;
            std::string rest;
            if (probe >> a >> b && !(probe >> rest) && a >= 0 && b >= 0) {
                if (b != dim)
                    throw FormatError("embedding header declares dim " + std::to_string(b) +
                                      ", expected " + std::to_string(dim));
                continue;
            }
        }

        std::string word;
        if (!(ss >> word)) continue;
        Vec v(dim);
        int k = 0;
        double x;
        while (k < dim && ss >> x) v(k++) = x;
        std::string extra;
        if (k != dim || (ss >> extra))
            throw FormatError("embeddings line " + std::to_string(lineno) + ": expected " +
                              std::to_string(dim) + " values for '" + word + "'");
        if (!vocab.contains(word)) continue;
        if (v.norm() == 0.0) {
            local.zero_rows.push_back(word);
            continue;
        }
        table.insert(word, std::move(v));
    }

    for (const auto& w : vocab.id_to_word)
        if (!table.contains(w)) local.missing.push_back(w);
    local.loaded = static_cast<size_t>(table.size());
    if (table.size() == 0)
        throw DomainError("embeddings file shares no words with the vocabulary: " + path);
    if (report) *report = std::move(local);
    return table;
}

inline double cosine_similarity(const Vec& u, const Vec& v) {
    if (u.size() != v.size()) throw DomainError("cosine_similarity: length mismatch");
    double nu = u.norm(), nv = v.norm();
    if (nu == 0.0 || nv == 0.0) throw DomainError("cosine_similarity: zero-norm vector");
    return u.dot(v) / (nu * nv);
}

// Neighbor lists hold input-corpus (source-language) words only: the agent
// may start anywhere but moves only to states of the input corpus. Edges
// among input words are symmetric; ordering is (similarity desc, id asc).
struct SimilarityGraph {
    double threshold = 0.79;
    std::unordered_map<std::string, std::vector<std::pair<std::string, double>>> adjacency;

    const std::vector<std::pair<std::string, double>>& neighbors(const std::string& w) const {
        static const std::vector<std::pair<std::string, double>> empty;
        auto it = adjacency.find(w);
        return it == adjacency.end() ? empty : it->second;
    }
};

inline SimilarityGraph build_similarity_graph(const EmbeddingTable& table,
                                              const Vocabulary& input_vocab,
                                              double threshold) {
    if (threshold < -1.0 || threshold > 1.0)
        throw DomainError("similarity threshold must lie in [-1,1]");
    SimilarityGraph g;
    g.threshold = threshold;

    std::vector<int> cand;  // table indices of input-vocab words, vocab-id order
    cand.reserve(input_vocab.id_to_word.size());
    for (const auto& w : input_vocab.id_to_word) {
        auto it = table.index.find(w);
        if (it != table.index.end()) cand.push_back(it->second);
    }

    std::vector<Vec> unit(table.vectors.size());
    for (size_t i = 0; i < table.vectors.size(); ++i)
        unit[i] = table.vectors[i] / table.vectors[i].norm();

    for (int ti = 0; ti < table.size(); ++ti) {
        const std::string& w = table.words[ti];
        std::vector<std::pair<std::string, double>> nbrs;
        for (size_t c = 0; c < cand.size(); ++c) {
            int tj = cand[c];
            if (tj == ti) continue;  // no self-edges
            double sim = unit[ti].dot(unit[tj]);
            if (sim >= threshold) nbrs.emplace_back(table.words[tj], sim);
        }
        if (nbrs.empty()) continue;
        std::stable_sort(nbrs.begin(), nbrs.end(), [&](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return input_vocab.id(a.first) < input_vocab.id(b.first);
        });
        g.adjacency.emplace(w, std::move(nbrs));
    }
    return g;
}

// Exhaustive scan in token-id order; ties go to the smallest id. With
// `restrict_to`, ids are the vocabulary's; otherwise the table's own order.
inline std::string nearest_word(const EmbeddingTable& table, const Vec& query,
                                const Vocabulary* restrict_to = nullptr) {
    if (table.size() == 0) throw DomainError("nearest_word: empty table");
    double qn = query.norm();
    if (qn == 0.0) throw DomainError("nearest_word: zero query vector");

    const std::string* best = nullptr;
    double best_sim = -2.0;
    auto consider = [&](const std::string& w, const Vec& v) {
        double sim = query.dot(v) / (qn * v.norm());
        if (sim > best_sim) {
            best_sim = sim;
            best = &w;
        }
    };
    if (restrict_to) {
        for (const auto& w : restrict_to->id_to_word) {
            auto it = table.index.find(w);
            if (it != table.index.end()) consider(w, table.vectors[it->second]);
        }
    } else {
        for (int i = 0; i < table.size(); ++i) consider(table.words[i], table.vectors[i]);
    }
    if (!best) throw DomainError("nearest_word: no candidate words available");
    return *best;
}

// Corpus-level coverage filter: drop pairs containing any word without an
// embedding, so every MDP state has a vector. Vocabularies are rebuilt.
inline Corpus filter_covered(const Corpus& corpus, const EmbeddingTable& table,
                             size_t* dropped = nullptr) {
    std::vector<SentencePair> kept;
    kept.reserve(corpus.pairs.size());
    for (const auto& p : corpus.pairs) {
        auto covered = [&](const std::vector<std::string>& ts) {
            return std::all_of(ts.begin(), ts.end(),
                               [&](const std::string& w) { return table.contains(w); });
        };
        if (covered(p.source_tokens) && covered(p.target_tokens)) kept.push_back(p);
    }
    if (dropped) *dropped = corpus.pairs.size() - kept.size();
    return Corpus::from_pairs(std::move(kept));
}

inline Vocabulary merged_vocab(const Corpus& corpus) {
    Vocabulary v;
    for (const auto& w : corpus.source_vocab.id_to_word) v.add(w);
    for (const auto& w : corpus.target_vocab.id_to_word) v.add(w);
    return v;
}

}  // namespace nmtmask
