#pragma once

// The MDP over word embeddings: a small MLP scoring (state, action) pairs,
// one-step Q-learning with the cosine reward, and the greedy graph walk that
// collects bonus-attention words at inference time.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "nmtmask/common.hpp"
#include "nmtmask/corpus.hpp"
#include "nmtmask/embeddings.hpp"
#include "nmtmask/seq2seq.hpp"

namespace nmtmask {

struct QConfig {
    // With the 128/256/128 net and the undiscounted bootstrap target, rates
    // near 0.1 oscillate to overflow on cyclic graphs; 1e-3 is stable.
    double alpha = 1e-3;
    int horizon = 4;
    double epsilon0 = 0.9;     // linear decay to 0.05 over the episode budget
    double threshold = 0.79;   // similarity-graph threshold
    double bonus = 0.25;       // attention bonus d
    int episodes = 2000;
    std::uint64_t seed = 0;
};

// Input = embedding + action flag; hidden 128/256/128 with rectifiers;
// linear scalar head.
struct QNetwork {
    std::vector<Mat> W;
    std::vector<Vec> b;

    int input_dim() const { return static_cast<int>(W.front().cols()); }

    static QNetwork init(int emb_dim, std::uint64_t seed) {
        const std::vector<int> dims = {emb_dim + 1, 128, 256, 128, 1};
        QNetwork net;
        Rng rng(seed);
        for (size_t l = 0; l + 1 < dims.size(); ++l) {
            Mat w(dims[l + 1], dims[l]);
            Vec bb(dims[l + 1]);
            for (Eigen::Index k = 0; k < w.size(); ++k)
                w.data()[k] = rng.uniform(-0.08, 0.08);
            for (Eigen::Index k = 0; k < bb.size(); ++k) bb(k) = rng.uniform(-0.08, 0.08);
            net.W.push_back(std::move(w));
            net.b.push_back(std::move(bb));
        }
        return net;
    }

    struct TensorView {
        std::string name;
        double* data;
        Eigen::Index size, rows, cols;
    };
    std::vector<TensorView> tensors() {
        std::vector<TensorView> out;
        for (size_t l = 0; l < W.size(); ++l) {
            out.push_back({"W" + std::to_string(l), W[l].data(), W[l].size(), W[l].rows(),
                           W[l].cols()});
            out.push_back({"b" + std::to_string(l), b[l].data(), b[l].size(), b[l].size(), 1});
        }
        return out;
    }
};

namespace detail {

struct QForward {
    std::vector<Vec> acts;  // acts[0] = input, acts[l+1] = post-activation of layer l
    double out = 0.0;
};

inline QForward q_forward(const QNetwork& net, const Vec& x) {
    QForward f;
    f.acts.push_back(x);
    Vec a = x;
    for (size_t l = 0; l < net.W.size(); ++l) {
        Vec z = net.W[l] * a + net.b[l];
        if (l + 1 < net.W.size()) z = z.cwiseMax(0.0);  // ReLU on hidden layers
        f.acts.push_back(z);
        a = std::move(z);
    }
    f.out = f.acts.back()(0);
    return f;
}

inline Vec q_input(const QNetwork& net, const Vec& state_embedding, int action) {
    if (state_embedding.size() + 1 != net.input_dim())
        throw DomainError("q_value: embedding dimension mismatch");
    Vec x(state_embedding.size() + 1);
    x << state_embedding, static_cast<double>(action);
    return x;
}

}  // namespace detail

inline double q_value(const QNetwork& net, const Vec& state_embedding, int action) {
    return detail::q_forward(net, detail::q_input(net, state_embedding, action)).out;
}

// Undiscounted bootstrap target: reward + max over actions of Q(next, .);
// gamma = 1, the finite horizon does the discounting.
inline double q_target(double reward, const Vec& next_state_embedding, const QNetwork& net) {
    return reward + std::max(q_value(net, next_state_embedding, 1),
                             q_value(net, next_state_embedding, 0));
}

struct Transition {
    std::string state, next_state;
    int action = 0;  // 0 = no action (next_state == state), 1 = hop
    double reward = 0.0;
    Vec state_emb, next_emb;
};

// Semi-gradient step with rate alpha on 0.5 (Q(s,a) - target)^2, target held
// fixed at its pre-update value. The tabular twin of this rule (the test
// oracle) is exactly Q <- Q + alpha (target - Q).
inline void q_update_step(QNetwork& net, const Transition& tr, double alpha) {
    if (alpha <= 0.0 || alpha > 1.0) throw DomainError("q_update_step: alpha out of (0,1]");
    double target = q_target(tr.reward, tr.next_emb, net);
    auto f = detail::q_forward(net, detail::q_input(net, tr.state_emb, tr.action));
    double delta = f.out - target;
    if (!std::isfinite(delta)) throw DomainError("q_update_step: non-finite TD error");

    // Backprop: dL/dout = delta; hidden layers mask through the rectifier.
    Vec grad = Vec::Constant(1, delta);
    for (size_t l = net.W.size(); l-- > 0;) {
        const Vec& a_in = f.acts[l];
        Vec next_grad = net.W[l].transpose() * grad;
        net.W[l].noalias() -= alpha * grad * a_in.transpose();
        net.b[l] -= alpha * grad;
        if (l > 0) {
            const Vec& post = f.acts[l];  // post-ReLU output of layer l-1
            grad = next_grad.cwiseProduct(
                (post.array() > 0.0).cast<double>().matrix());
        }
    }
}

enum class StopReason { action_zero, horizon, no_neighbors };

struct WalkTrace {
    std::string start;
    std::vector<std::string> visited;
    StopReason stop_reason = StopReason::horizon;
};

// Greedy walk driven by any Q function `qf(token, action) -> double`; the
// neural walk and the tests' hand-set tabular walks share this one loop.
// Stop when q(cur, 0) >= best hop value; q-ties between neighbors go to the
// smallest input-vocabulary id (the `ids` map), else lexicographic.
template <class QFn>
WalkTrace walk_with(QFn&& qf, const std::string& start, const SimilarityGraph& graph,
                    const QConfig& config,
                    const std::unordered_map<std::string, int>* ids = nullptr) {
    WalkTrace trace;
    trace.start = start;
    std::string cur = start;
    auto id_of = [&](const std::string& w) {
        if (ids) {
            auto it = ids->find(w);
            if (it != ids->end()) return it->second;
        }
        return std::numeric_limits<int>::max();
    };
    for (int step = 0; step < config.horizon; ++step) {
        const auto& nbrs = graph.neighbors(cur);
        if (nbrs.empty()) {
            trace.stop_reason = StopReason::no_neighbors;
            return trace;
        }
        double best_q = -std::numeric_limits<double>::infinity();
        const std::string* best = nullptr;
        for (const auto& [tok, sim] : nbrs) {
            (void)sim;
            double qv = qf(tok, 1);
            bool better = qv > best_q ||
                          (qv == best_q && best &&
                           (id_of(tok) < id_of(*best) ||
                            (id_of(tok) == id_of(*best) && tok < *best)));
            if (!best || better) {
                best_q = qv;
                best = &tok;
            }
        }
        if (qf(cur, 0) >= best_q) {
            trace.stop_reason = StopReason::action_zero;
            return trace;
        }
        trace.visited.push_back(*best);
        cur = *best;
    }
    trace.stop_reason = StopReason::horizon;
    return trace;
}

inline WalkTrace walk(const QNetwork& net, const std::string& start,
                      const SimilarityGraph& graph, const EmbeddingTable& table,
                      const QConfig& config,
                      const std::unordered_map<std::string, int>* ids = nullptr) {
    if (!table.contains(start)) throw DomainError("walk: start token has no embedding");
    auto qf = [&](const std::string& tok, int action) {
        return q_value(net, table.at(tok), action);
    };
    return walk_with(qf, start, graph, config, ids);
}

namespace detail {

// Greedy Bahdanau decode of one sentence (training-time episode seeding) —
// the same loop infer runs in attention mode, without the instrumentation.
inline std::vector<std::string> greedy_attention_decode(const Seq2SeqModel& model,
                                                        const EmbeddingTable& table,
                                                        const Vocabulary& target_vocab,
                                                        const std::vector<std::string>& tokens) {
    EncoderStates enc = encode(model, table, tokens);
    DecoderState st{enc.final_h, enc.final_c};
    Vec prev = Vec::Zero(model.emb_dim);
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (size_t j = 0; j < tokens.size(); ++j) {
        Vec a = attention_weights(model, st.h, enc);
        Vec ctx = Vec::Zero(model.hidden_dim);
        for (size_t i = 0; i < enc.states.size(); ++i)
            ctx += a(static_cast<Eigen::Index>(i)) * enc.states[i];
        auto [ns, y] = decode_step(model, prev, ctx, st);
        st = std::move(ns);
        std::string w = nearest_word(table, y, &target_vocab);
        prev = table.at(w);
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace detail

// Episode training. Starts are the words the trained baseline actually emits
// on the training sentences (decoded lazily, in a seed-shuffled sentence
// order, until the episode budget is covered). Epsilon decays linearly from
// epsilon0 to 0.05. A stop decision ends the episode without an update:
// "no action taken" yields no transition — bootstrapping stop transitions
// (reward cos(s,s) = 1 plus a max term) would ratchet stay-values above every
// hop and freeze the walk. Returns the mean per-step reward of each episode.
inline std::vector<double> train_q(QNetwork& net, const Corpus& corpus,
                                   const Seq2SeqModel& model, const SimilarityGraph& graph,
                                   const EmbeddingTable& table, const QConfig& config) {
    std::vector<double> trace;
    if (config.episodes <= 0) return trace;
    if (corpus.pairs.empty()) throw DomainError("train_q: empty corpus");

    Rng rng(config.seed);
    std::vector<size_t> sentence_order(corpus.pairs.size());
    for (size_t i = 0; i < sentence_order.size(); ++i) sentence_order[i] = i;
    rng.shuffle(sentence_order);

    std::vector<std::string> starts;
    size_t next_sentence = 0;
    auto refill = [&]() {
        while (starts.size() < static_cast<size_t>(config.episodes) &&
               next_sentence < sentence_order.size()) {
            const auto& pair = corpus.pairs[sentence_order[next_sentence++]];
            for (auto& w : detail::greedy_attention_decode(model, table, corpus.target_vocab,
                                                           pair.source_tokens))
                starts.push_back(std::move(w));
        }
    };
    refill();
    if (starts.empty()) throw DomainError("train_q: no episode start states");

    std::unordered_map<std::string, int> ids;
    for (int i = 0; i < corpus.source_vocab.size(); ++i)
        ids.emplace(corpus.source_vocab.id_to_word[i], i);

    trace.reserve(config.episodes);
    for (int e = 0; e < config.episodes; ++e) {
        double eps = config.episodes == 1
                         ? config.epsilon0
                         : config.epsilon0 + (0.05 - config.epsilon0) *
                               (static_cast<double>(e) /
                                static_cast<double>(config.episodes - 1));
        std::string cur = starts[static_cast<size_t>(e) % starts.size()];
        double reward_sum = 0.0;
        int steps = 0;
        for (int t = 0; t < config.horizon; ++t) {
            const auto& nbrs = graph.neighbors(cur);
            if (nbrs.empty()) break;

            int action;
            std::string next;
            if (rng.unit() < eps) {
                action = static_cast<int>(rng.index(2));
                if (action == 1) next = nbrs[rng.index(nbrs.size())].first;
            } else {
                double best_q = -std::numeric_limits<double>::infinity();
                const std::string* best = nullptr;
                for (const auto& [tok, sim] : nbrs) {
                    (void)sim;
                    double qv = q_value(net, table.at(tok), 1);
                    bool better =
                        qv > best_q ||
                        (qv == best_q && best && ids.count(tok) && ids.count(*best) &&
                         ids.at(tok) < ids.at(*best));
                    if (!best || better) {
                        best_q = qv;
                        best = &tok;
                    }
                }
                action = q_value(net, table.at(cur), 0) >= best_q ? 0 : 1;
                if (action == 1) next = *best;
            }
            if (action == 0) break;

            Transition tr;
            tr.state = cur;
            tr.next_state = next;
            tr.action = 1;
            tr.state_emb = table.at(cur);
            tr.next_emb = table.at(next);
            tr.reward = cosine_similarity(tr.next_emb, tr.state_emb);
            q_update_step(net, tr, config.alpha);
            reward_sum += tr.reward;
            ++steps;
            cur = std::move(next);
        }
        trace.push_back(steps == 0 ? 0.0 : reward_sum / steps);
    }
    return trace;
}

}  // namespace nmtmask
