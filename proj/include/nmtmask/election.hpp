#pragma once

// Election view of attention: output words are voters, input words are
// candidates. Borda tallies, k-Borda winners, the log-window radius, and the
// windowed-mass satisfaction score.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "nmtmask/common.hpp"
#include "nmtmask/seq2seq.hpp"

namespace nmtmask {

struct Election {
    int num_candidates = 0;                  // m = input positions
    std::vector<std::vector<int>> ballots;   // per voter: candidates, best first
};

struct BordaTally {
    std::vector<long long> scores;  // candidate -> accumulated points (m-1 .. 0)
};

inline Election ballots_from_attention(const AttentionMatrix& matrix) {
    const auto p = matrix.weights.rows();
    Election e;
    e.num_candidates = static_cast<int>(matrix.weights.cols());
    e.ballots.reserve(p);
    for (Eigen::Index r = 0; r < p; ++r) {
        std::vector<int> ballot(matrix.weights.cols());
        std::iota(ballot.begin(), ballot.end(), 0);
        std::stable_sort(ballot.begin(), ballot.end(), [&](int a, int b) {
            return matrix.weights(r, a) > matrix.weights(r, b);  // ties keep asc order
        });
        e.ballots.push_back(std::move(ballot));
    }
    return e;
}

inline BordaTally borda_tally(const Election& e) {
    BordaTally t;
    t.scores.assign(e.num_candidates, 0);
    for (const auto& ballot : e.ballots)
        for (size_t rank = 0; rank < ballot.size(); ++rank)
            t.scores[ballot[rank]] += static_cast<long long>(e.num_candidates) - 1 -
                                      static_cast<long long>(rank);
    return t;
}

// Top-k by Borda score, ties by ascending position; returned best-first.
inline std::vector<int> k_borda_winners(const Election& e, int k) {
    if (k < 1 || k > e.num_candidates)
        throw DomainError("k_borda_winners: k out of range");
    BordaTally t = borda_tally(e);
    std::vector<int> order(e.num_candidates);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return t.scores[a] > t.scores[b]; });
    order.resize(k);
    return order;
}

// Largest k with s^k <= p, by exact integer comparison (no std::log drift).
inline int window_radius(int p, int s) {
    if (p < 1) throw DomainError("window_radius: p must be >= 1");
    if (s < 2) throw DomainError("window_radius: base must be >= 2");
    long long power = 1;
    int k = 0;
    while (power * s <= p) {
        power *= s;
        ++k;
    }
    return k;
}

struct SatisfactionRow {
    std::string k_rule;
    double average_satisfaction = 0.0;  // percentage in [0, 100]
};

struct SatisfactionReport {
    std::vector<SatisfactionRow> rows;
};

// Per output word n: window = {n-k .. n+k} ∩ [0,p); satisfaction = share of
// the row's attention mass inside the window. Pooled mean over all words of
// all matrices.
inline SatisfactionRow satisfaction(const std::vector<AttentionMatrix>& matrices,
                                    const std::function<int(int)>& k_rule,
                                    const std::string& rule_name) {
    if (matrices.empty()) throw DomainError("satisfaction: no matrices");
    double total = 0.0;
    long long words = 0;
    for (const auto& m : matrices) {
        const auto p = m.weights.rows();
        const int k = k_rule(static_cast<int>(p));
        for (Eigen::Index n = 0; n < p; ++n) {
            double row_sum = m.weights.row(n).sum();
            if (row_sum <= 0) continue;
            double in_window = 0.0;
            for (Eigen::Index i = std::max<Eigen::Index>(0, n - k);
                 i < std::min<Eigen::Index>(p, n + k + 1); ++i)
                in_window += m.weights(n, i);
            total += 100.0 * in_window / row_sum;
            ++words;
        }
    }
    if (words == 0) throw DomainError("satisfaction: no scorable rows");
    return SatisfactionRow{rule_name, total / static_cast<double>(words)};
}

}  // namespace nmtmask
