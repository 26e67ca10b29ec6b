#pragma once

// Subcommand bodies behind the CLI front end: train, analyze, train-q,
// infer, bench. All artifact files are deterministic for a fixed config and
// seed (no timestamps, fixed formatting).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nmtmask/checkpoint.hpp"
#include "nmtmask/config.hpp"
#include "nmtmask/corpus.hpp"
#include "nmtmask/election.hpp"
#include "nmtmask/embeddings.hpp"
#include "nmtmask/eval.hpp"
#include "nmtmask/gaussmask.hpp"
#include "nmtmask/infer.hpp"
#include "nmtmask/qagent.hpp"
#include "nmtmask/seq2seq.hpp"

namespace nmtmask {

struct Pipeline {
    Corpus corpus;  // coverage-filtered
    CorpusSplits splits;
    EmbeddingTable table;
    size_t dropped_pairs = 0;
    EmbeddingLoadReport embedding_report;
};

inline Pipeline load_pipeline(const RunConfig& cfg, std::ostream* log = nullptr) {
    if (cfg.corpus_path.empty())
        throw ConfigError("config key 'corpus.path' is required");
    if (cfg.embeddings_path.empty())
        throw ConfigError("config key 'embeddings.path' is required");
    if (cfg.embeddings_dim <= 0)
        throw ConfigError("config key 'embeddings.dim' is required");

    Pipeline p;
    std::optional<size_t> cap;
    if (cfg.corpus_max_pairs) cap = static_cast<size_t>(*cfg.corpus_max_pairs);
    Corpus raw = load_parallel_corpus(cfg.corpus_path, cap);
    p.table = load_embeddings(cfg.embeddings_path, merged_vocab(raw), cfg.embeddings_dim,
                              &p.embedding_report);
    p.corpus = filter_covered(raw, p.table, &p.dropped_pairs);
    if (p.corpus.pairs.empty())
        throw DomainError("no corpus pairs survive the embedding-coverage filter");
    p.splits = split_corpus(p.corpus, cfg.split_ratios, cfg.resolved_corpus_seed());
    if (log) {
        *log << "corpus: " << raw.pairs.size() << " pairs loaded, " << p.dropped_pairs
             << " dropped for embedding coverage; splits " << p.splits.train.pairs.size()
             << "/" << p.splits.val.pairs.size() << "/" << p.splits.test.pairs.size()
             << "\n";
        if (!p.embedding_report.missing.empty())
            *log << "embeddings: " << p.embedding_report.missing.size()
                 << " vocabulary words missing from " << cfg.embeddings_path << "\n";
        if (!p.embedding_report.zero_rows.empty())
            *log << "embeddings: " << p.embedding_report.zero_rows.size()
                 << " zero-vector rows skipped\n";
    }
    return p;
}

namespace detail {

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
}

inline void write_trace_csv(const std::string& path, const char* header,
                            const std::vector<double>& values) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write trace file: " + path);
    out << header << "\n";
    char buf[64];
    for (size_t i = 0; i < values.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g", i, values[i]);
        out << buf << "\n";
    }
}

inline std::unordered_map<std::string, int> vocab_ids(const Vocabulary& v) {
    std::unordered_map<std::string, int> ids;
    for (int i = 0; i < v.size(); ++i) ids.emplace(v.id_to_word[i], i);
    return ids;
}

}  // namespace detail

inline std::string cmd_train(const RunConfig& cfg, std::ostream* log = nullptr) {
    Pipeline p = load_pipeline(cfg, log);
    TrainHyper hyper{cfg.train_lr, cfg.train_epochs, cfg.resolved_train_seed(),
                     cfg.train_grad_clip};
    Seq2SeqModel model =
        Seq2SeqModel::init(p.table.dim, cfg.hidden_dim, cfg.resolved_align_dim(),
                           derive_seed(hyper.seed, "init"));
    std::vector<double> trace = train(model, p.splits.train, p.table, hyper);

    detail::ensure_dir(cfg.out_dir);
    std::string ckpt = cfg.out_dir + "/model.ckpt";
    save_seq2seq(ckpt, model, hyper);
    detail::write_trace_csv(cfg.out_dir + "/loss_trace.csv", "epoch,loss", trace);
    if (log) {
        *log << "trained " << cfg.train_epochs << " epochs on "
             << p.splits.train.pairs.size() << " pairs";
        if (!trace.empty()) *log << "; final loss " << trace.back();
        *log << "\nwrote " << ckpt << "\n";
    }
    return ckpt;
}

// Exported attention matrices travel as JSON: token lists plus a row-major
// grid per sentence. This is both an analyze input and an analyze output.
inline nlohmann::ordered_json matrices_to_json(const std::vector<AttentionMatrix>& mats,
                                               const Corpus& corpus) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (size_t k = 0; k < mats.size(); ++k) {
        nlohmann::ordered_json item;
        item["source"] = corpus.pairs[k].source_tokens;
        item["target"] = corpus.pairs[k].target_tokens;
        item["normalization"] =
            mats[k].normalization == Normalization::max ? "max" : "softmax";
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (Eigen::Index r = 0; r < mats[k].weights.rows(); ++r) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (Eigen::Index c = 0; c < mats[k].weights.cols(); ++c)
                row.push_back(mats[k].weights(r, c));
            rows.push_back(std::move(row));
        }
        item["weights"] = std::move(rows);
        arr.push_back(std::move(item));
    }
    return arr;
}

inline std::vector<AttentionMatrix> matrices_from_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open matrices file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError("bad matrices JSON in " + path + ": " + ex.what());
    }
    std::vector<AttentionMatrix> out;
    for (const auto& item : j) {
        const auto& rows = item.at("weights");
        AttentionMatrix m;
        m.normalization = item.value("normalization", std::string("max")) == "softmax"
                              ? Normalization::softmax
                              : Normalization::max;
        m.weights = Mat(rows.size(), rows.empty() ? 0 : rows[0].size());
        for (size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != rows.size())
                throw FormatError("matrices JSON: non-square grid in " + path);
            for (size_t c = 0; c < rows[r].size(); ++c)
                m.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    rows[r][c].get<double>();
        }
        out.push_back(std::move(m));
    }
    return out;
}

struct AnalyzeOptions {
    std::string model_path;     // default: <out.dir>/model.ckpt
    std::string matrices_path;  // when set, analyze this export instead of a model
    bool fit = false;
};

inline SatisfactionReport satisfaction_table(const std::vector<AttentionMatrix>& mats) {
    SatisfactionReport rep;
    rep.rows.push_back(
        satisfaction(mats, [](int p) { return window_radius(p, 4); }, "floor(log4(p))"));
    rep.rows.push_back(
        satisfaction(mats, [](int p) { return window_radius(p, 3); }, "floor(log3(p))"));
    rep.rows.push_back(
        satisfaction(mats, [](int p) { return window_radius(p, 2); }, "floor(log2(p))"));
    rep.rows.push_back(satisfaction(mats, [](int p) { return p / 2; }, "floor(p/2)"));
    return rep;
}

inline void cmd_analyze(const RunConfig& cfg, const AnalyzeOptions& opt,
                        std::ostream& out, std::ostream* log = nullptr) {
    std::vector<AttentionMatrix> mats;
    detail::ensure_dir(cfg.out_dir);
    if (!opt.matrices_path.empty()) {
        mats = matrices_from_json(opt.matrices_path);
    } else {
        std::string model_path =
            opt.model_path.empty() ? cfg.out_dir + "/model.ckpt" : opt.model_path;
        if (!std::filesystem::exists(model_path))
            throw ConfigError("model checkpoint not found: " + model_path);
        Pipeline p = load_pipeline(cfg, log);
        if (p.splits.val.pairs.empty())
            throw ConfigError("validation split is empty; nothing to analyze");
        auto [model, hyper] = load_seq2seq(model_path);
        (void)hyper;
        mats = export_attention(model, p.splits.val, p.table, Normalization::max);
        std::ofstream mj(cfg.out_dir + "/attention_matrices.json", std::ios::binary);
        if (!mj) throw IoError("cannot write attention_matrices.json");
        mj << matrices_to_json(mats, p.splits.val).dump(2) << "\n";
    }
    if (mats.empty()) throw ConfigError("no attention matrices to analyze");

    SatisfactionReport rep = satisfaction_table(mats);
    {
        std::ofstream csv(cfg.out_dir + "/satisfaction.csv", std::ios::binary);
        if (!csv) throw IoError("cannot write satisfaction.csv");
        csv << "k_rule,average_satisfaction\n";
        char buf[64];
        for (const auto& row : rep.rows) {
            std::snprintf(buf, sizeof(buf), "%.6f", row.average_satisfaction);
            csv << row.k_rule << "," << buf << "\n";
        }
    }
    for (const auto& row : rep.rows)
        out << row.k_rule << ": " << row.average_satisfaction << "\n";

    if (opt.fit) {
        std::ofstream csv(cfg.out_dir + "/gaussian_fit.csv", std::ios::binary);
        if (!csv) throw IoError("cannot write gaussian_fit.csv");
        csv << "sentence,row,mu,sigma,rmse,gaussian_like\n";
        long long like = 0, rows = 0;
        char buf[160];
        for (size_t s = 0; s < mats.size(); ++s) {
            for (Eigen::Index r = 0; r < mats[s].weights.rows(); ++r) {
                GaussianFit f = fit_gaussian(mats[s].weights.row(r).transpose());
                bool is_like = f.rmse < kGaussianRmseThreshold;
                like += is_like;
                ++rows;
                std::snprintf(buf, sizeof(buf), "%zu,%lld,%.6f,%.6f,%.6f,%s", s,
                              static_cast<long long>(r), f.mu, f.sigma, f.rmse,
                              is_like ? "yes" : "no");
                csv << buf << "\n";
            }
        }
        double pct = rows == 0 ? 0.0 : 100.0 * static_cast<double>(like) / rows;
        out << "gaussian-like rows: " << like << "/" << rows << " (" << pct << "%)\n";
    }
}

inline std::string cmd_train_q(const RunConfig& cfg, const std::string& model_path_opt,
                               std::ostream* log = nullptr) {
    std::string model_path =
        model_path_opt.empty() ? cfg.out_dir + "/model.ckpt" : model_path_opt;
    if (!std::filesystem::exists(model_path))
        throw ConfigError("model checkpoint not found: " + model_path);
    Pipeline p = load_pipeline(cfg, log);
    auto [model, hyper] = load_seq2seq(model_path);
    (void)hyper;

    SimilarityGraph graph =
        build_similarity_graph(p.table, p.corpus.source_vocab, cfg.graph_threshold);
    QConfig qcfg;
    qcfg.alpha = cfg.q_alpha;
    qcfg.horizon = cfg.q_horizon;
    qcfg.epsilon0 = cfg.q_epsilon0;
    qcfg.threshold = cfg.graph_threshold;
    qcfg.bonus = cfg.q_bonus;
    qcfg.episodes = cfg.q_episodes;
    qcfg.seed = cfg.resolved_q_seed();

    QNetwork net = QNetwork::init(p.table.dim, derive_seed(qcfg.seed, "init"));
    std::vector<double> trace = train_q(net, p.splits.train, model, graph, p.table, qcfg);

    detail::ensure_dir(cfg.out_dir);
    std::string ckpt = cfg.out_dir + "/qnet.ckpt";
    save_qnet(ckpt, net);
    detail::write_trace_csv(cfg.out_dir + "/reward_trace.csv", "episode,reward", trace);
    if (log) *log << "trained " << trace.size() << " episodes\nwrote " << ckpt << "\n";
    return ckpt;
}

struct InferCliOptions {
    std::string mode = "attention";
    std::string model_path;
    std::string qnet_path;
    std::string input_path = "-";  // "-" = stdin
    std::string emit_weights_path;
};

inline void cmd_infer(const RunConfig& cfg, const InferCliOptions& opt, std::istream& stdin_,
                      std::ostream& out, std::ostream* log = nullptr) {
    InferenceMode mode = parse_mode(opt.mode);
    if (mode == InferenceMode::gaussian_rl && opt.qnet_path.empty())
        throw ConfigError("--qnet is required for gaussian_rl mode");
    std::string model_path =
        opt.model_path.empty() ? cfg.out_dir + "/model.ckpt" : opt.model_path;
    if (!std::filesystem::exists(model_path))
        throw ConfigError("model checkpoint not found: " + model_path);

    Pipeline p = load_pipeline(cfg, log);
    auto [model, hyper] = load_seq2seq(model_path);
    (void)hyper;
    std::optional<QNetwork> qnet;
    SimilarityGraph graph;
    std::unordered_map<std::string, int> ids;
    if (mode == InferenceMode::gaussian_rl) {
        if (!std::filesystem::exists(opt.qnet_path))
            throw ConfigError("qnet checkpoint not found: " + opt.qnet_path);
        qnet = load_qnet(opt.qnet_path);
        graph = build_similarity_graph(p.table, p.corpus.source_vocab, cfg.graph_threshold);
        ids = detail::vocab_ids(p.corpus.source_vocab);
    }

    std::vector<std::vector<std::string>> sentences;
    auto read_all = [&](std::istream& in) {
        std::string line;
        while (std::getline(in, line)) sentences.push_back(tokenize(line));
    };
    if (opt.input_path == "-") {
        read_all(stdin_);
    } else {
        std::ifstream f(opt.input_path);
        if (!f) throw ConfigError("cannot open input file: " + opt.input_path);
        read_all(f);
    }

    InferOptions io;
    io.d = cfg.q_bonus;
    io.horizon = cfg.q_horizon;
    io.restrict_output = &p.corpus.target_vocab;
    io.walk_ids = &ids;

    nlohmann::ordered_json weights_out = nlohmann::ordered_json::array();
    for (const auto& sent : sentences) {
        try {
            TranslationResult r = translate(model, qnet ? &*qnet : nullptr, p.table,
                                            mode == InferenceMode::gaussian_rl ? &graph : nullptr,
                                            sent, mode, io);
            for (size_t k = 0; k < r.output_tokens.size(); ++k)
                out << (k ? " " : "") << r.output_tokens[k];
            out << "\n";
            if (!opt.emit_weights_path.empty()) {
                nlohmann::ordered_json item;
                item["source"] = r.source_tokens;
                item["output"] = r.output_tokens;
                nlohmann::ordered_json rows = nlohmann::ordered_json::array();
                for (Eigen::Index rr = 0; rr < r.per_step_weights.rows(); ++rr) {
                    nlohmann::ordered_json row = nlohmann::ordered_json::array();
                    for (Eigen::Index cc = 0; cc < r.per_step_weights.cols(); ++cc)
                        row.push_back(r.per_step_weights(rr, cc));
                    rows.push_back(std::move(row));
                }
                item["weights"] = std::move(rows);
                weights_out.push_back(std::move(item));
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& ex) {
            out << "\n";  // keep line alignment for failed sentences
            if (log) *log << "infer: sentence skipped: " << ex.what() << "\n";
        }
    }
    if (!opt.emit_weights_path.empty()) {
        std::ofstream wj(opt.emit_weights_path, std::ios::binary);
        if (!wj) throw IoError("cannot write weights file: " + opt.emit_weights_path);
        wj << weights_out.dump(2) << "\n";
    }
}

struct BenchOptions {
    std::string model_path;
    std::string qnet_path;   // optional; without it gaussian_rl is "n/a"
    std::string test_path;   // optional TSV; default = config test split
    int repetitions = 5;
    std::string out_dir;     // optional override of out.dir
};

inline void cmd_bench(const RunConfig& cfg, const BenchOptions& opt,
                      std::ostream* log = nullptr) {
    std::string model_path =
        opt.model_path.empty() ? cfg.out_dir + "/model.ckpt" : opt.model_path;
    if (!std::filesystem::exists(model_path))
        throw ConfigError("model checkpoint not found: " + model_path);
    Pipeline p = load_pipeline(cfg, log);
    auto [model, hyper] = load_seq2seq(model_path);
    (void)hyper;

    std::optional<QNetwork> qnet;
    if (!opt.qnet_path.empty()) {
        if (!std::filesystem::exists(opt.qnet_path))
            throw ConfigError("qnet checkpoint not found: " + opt.qnet_path);
        qnet = load_qnet(opt.qnet_path);
    }

    Corpus test = p.splits.test;
    if (!opt.test_path.empty()) {
        size_t dropped = 0;
        test = filter_covered(load_parallel_corpus(opt.test_path), p.table, &dropped);
        if (log && dropped)
            *log << "bench: " << dropped << " test pairs dropped for embedding coverage\n";
    }
    if (test.pairs.empty()) throw ConfigError("bench: test set is empty");

    SimilarityGraph graph =
        build_similarity_graph(p.table, p.corpus.source_vocab, cfg.graph_threshold);
    auto ids = detail::vocab_ids(p.corpus.source_vocab);
    InferOptions io;
    io.d = cfg.q_bonus;
    io.horizon = cfg.q_horizon;
    io.restrict_output = &p.corpus.target_vocab;
    io.walk_ids = &ids;

    std::vector<std::pair<std::string, InferenceMode>> modes = {
        {"attention", InferenceMode::attention}, {"gaussian", InferenceMode::gaussian}};
    if (qnet) modes.emplace_back("gaussian_rl", InferenceMode::gaussian_rl);

    std::vector<std::pair<std::string, std::optional<BleuReport>>> bleu_by_mode = {
        {"attention", std::nullopt},
        {"gaussian", std::nullopt},
        {"gaussian_rl", std::nullopt}};
    std::vector<std::pair<std::string, TranslateFn>> engines;
    for (auto& [name, mode] : modes) {
        InferenceMode m = mode;
        engines.emplace_back(name, [&, m](const std::vector<std::string>& sent) {
            return translate(model, qnet ? &*qnet : nullptr, p.table,
                             m == InferenceMode::gaussian_rl ? &graph : nullptr, sent, m, io);
        });
        std::vector<std::vector<std::string>> sents, refs, hyps;
        for (const auto& pr : test.pairs) sents.push_back(pr.source_tokens);
        std::vector<BatchError> errs;
        auto results = batch_translate(model, qnet ? &*qnet : nullptr, p.table,
                                       m == InferenceMode::gaussian_rl ? &graph : nullptr,
                                       sents, m, io, &errs);
        size_t ri = 0;
        std::vector<size_t> failed;
        for (const auto& e : errs) failed.push_back(e.index);
        for (size_t k = 0; k < test.pairs.size(); ++k) {
            if (std::find(failed.begin(), failed.end(), k) != failed.end()) continue;
            refs.push_back(test.pairs[k].target_tokens);
            hyps.push_back(results[ri++].output_tokens);
        }
        BleuReport rep = corpus_bleu(refs, hyps);
        for (auto& [bm, br] : bleu_by_mode)
            if (bm == name) br = rep;
        if (log)
            *log << "bleu[" << name << "] = " << rep.corpus_bleu << " over " << refs.size()
                 << " sentences\n";
    }

    LatencyReport latency = benchmark_latency(engines, test, opt.repetitions,
                                              log ? log : nullptr);
    SatisfactionReport sat =
        satisfaction_table(export_attention(model, test, p.table, Normalization::max));

    std::string out_dir = opt.out_dir.empty() ? cfg.out_dir : opt.out_dir;
    emit_report(bleu_by_mode, latency, sat, out_dir);
    if (log) *log << "wrote " << out_dir << "/{bleu.json,latency.csv,satisfaction.csv}\n";
}

}  // namespace nmtmask
