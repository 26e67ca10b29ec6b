#pragma once

// The three inference engines: Bahdanau attention, Gaussian mask, and
// Gaussian mask + Q-walk bonus. All decode exactly p steps for a p-token
// input and feed the emitted word's embedding back as the next decoder input.

#include <chrono>
#include <functional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "nmtmask/common.hpp"
#include "nmtmask/embeddings.hpp"
#include "nmtmask/gaussmask.hpp"
#include "nmtmask/qagent.hpp"
#include "nmtmask/seq2seq.hpp"

namespace nmtmask {

enum class InferenceMode { attention, gaussian, gaussian_rl };

inline const char* mode_name(InferenceMode m) {
    switch (m) {
        case InferenceMode::attention: return "attention";
        case InferenceMode::gaussian: return "gaussian";
        default: return "gaussian_rl";
    }
}

inline InferenceMode parse_mode(const std::string& s) {
    if (s == "attention") return InferenceMode::attention;
    if (s == "gaussian") return InferenceMode::gaussian;
    if (s == "gaussian_rl") return InferenceMode::gaussian_rl;
    throw ConfigError("unknown inference mode: " + s);
}

struct TranslationResult {
    std::vector<std::string> source_tokens;
    std::vector<std::string> output_tokens;
    Mat per_step_weights;        // p x p; softmax, Gaussian, or Gaussian+bonus rows
    double wall_time_ms = 0.0;   // decode loop only
    std::uint64_t flop_estimate = 0;  // decode-loop arithmetic, comparable across modes
};

struct InferOptions {
    std::function<double(int)> sigma_rule;           // defaults to default_sigma
    double d = 0.25;                                 // RL attention bonus
    int horizon = 4;                                 // walk cap
    const Vocabulary* restrict_output = nullptr;     // nearest-word candidates
    const std::unordered_map<std::string, int>* walk_ids = nullptr;  // tie-break ids
};

namespace detail {

// Deterministic per-mode work estimates (multiply-add = 2) so tests can
// assert the mask does strictly less decode work than the attention head.
inline std::uint64_t flops_lstm(int in, int h) {
    return 8ull * h * (in + h) + 10ull * h;
}
inline std::uint64_t flops_attention_step(int h, int a, int p) {
    return 2ull * a * h + static_cast<std::uint64_t>(p) * (2ull * a * h + 10ull * a) +
           8ull * p + 2ull * h * p;
}
inline std::uint64_t flops_gaussian_step(int h, int p) {
    return 8ull * p + 2ull * h * p;
}
inline std::uint64_t flops_qeval(int e) {
    return 2ull * (128ull * (e + 1) + 256ull * 128 + 128ull * 256 + 128) + 512ull;
}
inline std::uint64_t flops_nearest(int e, int candidates) {
    return static_cast<std::uint64_t>(candidates) * (3ull * e);
}

}  // namespace detail

inline TranslationResult translate(const Seq2SeqModel& model, const QNetwork* qnet,
                                   const EmbeddingTable& table, const SimilarityGraph* graph,
                                   const std::vector<std::string>& sentence,
                                   InferenceMode mode, const InferOptions& opt = {}) {
    if (sentence.empty()) throw DomainError("translate: empty sentence");
    if (mode == InferenceMode::gaussian_rl && (!qnet || !graph))
        throw ConfigError("gaussian_rl mode needs a trained Q-network and a similarity graph");

    const int p = static_cast<int>(sentence.size());
    const int h = model.hidden_dim;
    const int e = model.emb_dim;
    auto sigma_of = [&](int len) {
        return opt.sigma_rule ? opt.sigma_rule(len) : default_sigma(len);
    };
    const int ncand = opt.restrict_output ? opt.restrict_output->size() : table.size();

    TranslationResult res;
    res.source_tokens = sentence;
    res.per_step_weights = Mat::Zero(p, p);
    EncoderStates enc = encode(model, table, sentence);

    QConfig wcfg;
    wcfg.horizon = opt.horizon;
    std::uint64_t qevals = 0;
    auto qf = [&](const std::string& tok, int action) {
        ++qevals;
        return q_value(*qnet, table.at(tok), action);
    };

    auto t0 = std::chrono::steady_clock::now();

    DecoderState st{enc.final_h, enc.final_c};
    Vec prev = Vec::Zero(e);
    std::string walk_word;
    if (mode == InferenceMode::gaussian_rl) {
        // Algorithm seed: the final encoder output, read back as a word.
        walk_word = nearest_word(table, model.Wout * enc.final_h + model.bout,
                                 opt.restrict_output);
        res.flop_estimate += 2ull * e * h + detail::flops_nearest(e, ncand);
    }

    for (int j = 0; j < p; ++j) {
        Vec weights;
        if (mode == InferenceMode::attention) {
            weights = attention_weights(model, st.h, enc);
            res.flop_estimate += detail::flops_attention_step(h, model.align_dim, p);
        } else {
            weights = gaussian_weights(p, j, sigma_of(p));
            res.flop_estimate += detail::flops_gaussian_step(h, p);
            if (mode == InferenceMode::gaussian_rl) {
                WalkTrace trace = walk_with(qf, walk_word, *graph, wcfg, opt.walk_ids);
                std::unordered_set<std::string> similar(trace.visited.begin(),
                                                        trace.visited.end());
                for (int i = 0; i < p; ++i)
                    if (i != j && similar.count(sentence[i])) weights(i) += opt.d;
            }
        }

        Vec ctx = Vec::Zero(h);
        for (int i = 0; i < p; ++i) ctx += weights(i) * enc.states[i];

        auto [ns, y] = decode_step(model, prev, ctx, st);
        st = std::move(ns);
        res.flop_estimate += detail::flops_lstm(e + h, h) + 2ull * e * h +
                             detail::flops_nearest(e, ncand);

        std::string word = nearest_word(table, y, opt.restrict_output);
        prev = table.at(word);
        walk_word = word;  // next step's walk starts from this emission
        res.per_step_weights.row(j) = weights.transpose();
        res.output_tokens.push_back(std::move(word));
    }

    auto t1 = std::chrono::steady_clock::now();
    res.wall_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    res.flop_estimate += qevals * detail::flops_qeval(e);
    return res;
}

struct BatchError {
    size_t index;
    std::string message;
};

inline std::vector<TranslationResult> batch_translate(
    const Seq2SeqModel& model, const QNetwork* qnet, const EmbeddingTable& table,
    const SimilarityGraph* graph, const std::vector<std::vector<std::string>>& sentences,
    InferenceMode mode, const InferOptions& opt = {},
    std::vector<BatchError>* errors = nullptr) {
    std::vector<TranslationResult> out;
    out.reserve(sentences.size());
    for (size_t k = 0; k < sentences.size(); ++k) {
        try {
            out.push_back(translate(model, qnet, table, graph, sentences[k], mode, opt));
        } catch (const ConfigError&) {
            throw;  // mode/artifact mismatch is not a per-sentence condition
        } catch (const std::exception& ex) {
            if (errors) errors->push_back({k, ex.what()});
        }
    }
    return out;
}

}  // namespace nmtmask
