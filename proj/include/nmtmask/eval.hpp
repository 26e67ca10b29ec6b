#pragma once

// Evaluation harness: corpus BLEU with equal n-gram weights, the bucketed
// latency benchmark, and emission of the three report tables.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nmtmask/common.hpp"
#include "nmtmask/corpus.hpp"
#include "nmtmask/election.hpp"
#include "nmtmask/infer.hpp"

namespace nmtmask {

struct BleuReport {
    double corpus_bleu = 0.0;           // percentage in [0, 100]
    std::vector<double> precisions;     // p1..p_max_n
    double brevity_penalty = 1.0;
    int max_n = 4;
};

// Corpus-level BLEU, clipped counts, no smoothing: any zero precision zeroes
// the score. Single reference per hypothesis.
inline BleuReport corpus_bleu(const std::vector<std::vector<std::string>>& references,
                              const std::vector<std::vector<std::string>>& hypotheses,
                              int max_n = 4) {
    if (references.size() != hypotheses.size())
        throw DomainError("corpus_bleu: reference/hypothesis count mismatch");
    if (max_n < 1) throw DomainError("corpus_bleu: max_n must be >= 1");

    BleuReport rep;
    rep.max_n = max_n;
    std::vector<long long> matched(max_n, 0), total(max_n, 0);
    long long ref_len = 0, hyp_len = 0;

    using Ngram = std::vector<std::string>;
    for (size_t s = 0; s < references.size(); ++s) {
        const auto& ref = references[s];
        const auto& hyp = hypotheses[s];
        ref_len += static_cast<long long>(ref.size());
        hyp_len += static_cast<long long>(hyp.size());
        for (int n = 1; n <= max_n; ++n) {
            std::map<Ngram, long long> ref_counts;
            for (size_t i = 0; i + n <= ref.size(); ++i)
                ++ref_counts[Ngram(ref.begin() + i, ref.begin() + i + n)];
            std::map<Ngram, long long> hyp_counts;
            for (size_t i = 0; i + n <= hyp.size(); ++i)
                ++hyp_counts[Ngram(hyp.begin() + i, hyp.begin() + i + n)];
            for (const auto& [ng, cnt] : hyp_counts) {
                auto it = ref_counts.find(ng);
                if (it != ref_counts.end()) matched[n - 1] += std::min(cnt, it->second);
                total[n - 1] += cnt;
            }
        }
    }

    rep.precisions.resize(max_n);
    bool any_zero = false;
    double log_sum = 0.0;
    for (int n = 0; n < max_n; ++n) {
        rep.precisions[n] = total[n] == 0 ? 0.0
                                          : static_cast<double>(matched[n]) /
                                                static_cast<double>(total[n]);
        if (rep.precisions[n] <= 0.0)
            any_zero = true;
        else
            log_sum += std::log(rep.precisions[n]) / max_n;
    }
    rep.brevity_penalty =
        hyp_len >= ref_len || hyp_len == 0
            ? 1.0
            : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
    rep.corpus_bleu = any_zero ? 0.0 : 100.0 * rep.brevity_penalty * std::exp(log_sum);
    return rep;
}

using TranslateFn = std::function<TranslationResult(const std::vector<std::string>&)>;

struct LatencyBucket {
    std::string label;
    int lo = 0, hi = 0;
    size_t samples = 0;
    bool reliable = true;  // >= 30 sentences
    std::vector<std::pair<std::string, double>> mode_mean_ms;  // engine order
};

struct LatencyReport {
    std::vector<LatencyBucket> buckets;
    int repetitions = 0;
};

// Per bucket and mode: mean over sentences of the median-of-repetitions
// decode time. Every mode sees the identical sentence list; one warmup call
// per sentence and mode is discarded. Strictly single-threaded.
inline LatencyReport benchmark_latency(
    const std::vector<std::pair<std::string, TranslateFn>>& engines, const Corpus& test_set,
    int repetitions, std::ostream* warnings = nullptr) {
    if (repetitions < 1) throw DomainError("benchmark_latency: repetitions must be >= 1");
    LatencyReport report;
    report.repetitions = repetitions;
    const std::vector<std::pair<int, int>> ranges = {{4, 7}, {8, 11}, {12, 15}};

    for (auto [lo, hi] : ranges) {
        LatencyBucket bucket;
        bucket.lo = lo;
        bucket.hi = hi;
        bucket.label = std::to_string(lo) + "-" + std::to_string(hi);

        std::vector<const std::vector<std::string>*> sentences;
        for (const auto& pair : test_set.pairs) {
            int len = static_cast<int>(pair.source_tokens.size());
            if (len >= lo && len <= hi) sentences.push_back(&pair.source_tokens);
        }
        bucket.samples = sentences.size();
        bucket.reliable = sentences.size() >= 30;
        if (!bucket.reliable && warnings)
            *warnings << "warning: latency bucket " << bucket.label << " has only "
                      << sentences.size() << " sentences (< 30); marked unreliable\n";

        for (const auto& [name, fn] : engines) {
            double sum_ms = 0.0;
            for (const auto* sent : sentences) {
                fn(*sent);  // warmup, excluded
                std::vector<double> times;
                times.reserve(repetitions);
                for (int r = 0; r < repetitions; ++r) times.push_back(fn(*sent).wall_time_ms);
                std::sort(times.begin(), times.end());
                double median = times.size() % 2 == 1
                                    ? times[times.size() / 2]
                                    : 0.5 * (times[times.size() / 2 - 1] +
                                             times[times.size() / 2]);
                sum_ms += median;
            }
            bucket.mode_mean_ms.emplace_back(
                name, sentences.empty() ? 0.0 : sum_ms / static_cast<double>(sentences.size()));
        }
        report.buckets.push_back(std::move(bucket));
    }
    return report;
}

inline nlohmann::ordered_json bleu_to_json(const BleuReport& r) {
    nlohmann::ordered_json j;
    j["bleu"] = r.corpus_bleu;
    j["precisions"] = r.precisions;
    j["brevity_penalty"] = r.brevity_penalty;
    j["max_n"] = r.max_n;
    return j;
}

inline BleuReport bleu_from_json(const nlohmann::json& j) {
    BleuReport r;
    r.corpus_bleu = j.at("bleu").get<double>();
    r.precisions = j.at("precisions").get<std::vector<double>>();
    r.brevity_penalty = j.at("brevity_penalty").get<double>();
    r.max_n = j.at("max_n").get<int>();
    return r;
}

namespace detail {

inline std::string fmt_ms(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace detail

// Writes bleu.json, latency.csv, satisfaction.csv under `dir`. Field order
// is fixed; modes without results appear as "n/a" columns / null entries.
inline void emit_report(
    const std::vector<std::pair<std::string, std::optional<BleuReport>>>& bleu_by_mode,
    const LatencyReport& latency, const SatisfactionReport& satisfaction,
    const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);

    {
        nlohmann::ordered_json j;
        for (const auto& [mode, rep] : bleu_by_mode)
            j[mode] = rep ? bleu_to_json(*rep) : nlohmann::ordered_json(nullptr);
        std::ofstream out(fs::path(dir) / "bleu.json");
        if (!out) throw IoError("cannot write bleu.json under " + dir);
        out << j.dump(2) << "\n";
    }
    {
        std::ofstream out(fs::path(dir) / "latency.csv");
        if (!out) throw IoError("cannot write latency.csv under " + dir);
        out << "bucket,samples";
        for (const auto& [mode, rep] : bleu_by_mode) out << "," << mode << "_ms";
        out << ",reliable\n";
        for (const auto& b : latency.buckets) {
            out << b.label << "," << b.samples;
            for (const auto& [mode, rep] : bleu_by_mode) {
                auto it = std::find_if(b.mode_mean_ms.begin(), b.mode_mean_ms.end(),
                                       [&](const auto& mm) { return mm.first == mode; });
                if (it == b.mode_mean_ms.end() || b.samples == 0)
                    out << ",n/a";
                else
                    out << "," << detail::fmt_ms(it->second);
            }
            out << "," << (b.reliable ? "yes" : "no") << "\n";
        }
    }
    {
        std::ofstream out(fs::path(dir) / "satisfaction.csv");
        if (!out) throw IoError("cannot write satisfaction.csv under " + dir);
        out << "k_rule,average_satisfaction\n";
        for (const auto& row : satisfaction.rows)
            out << row.k_rule << "," << detail::fmt_ms(row.average_satisfaction) << "\n";
    }
}

}  // namespace nmtmask
