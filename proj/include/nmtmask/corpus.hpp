#pragma once

// Parallel-corpus ingestion: tokenization, the equal-length filter, vocab
// construction, and deterministic train/val/test splits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "nmtmask/common.hpp"

namespace nmtmask {

struct Vocabulary {
    std::unordered_map<std::string, int> word_to_id;
    std::vector<std::string> id_to_word;

    int add(const std::string& w) {
        auto it = word_to_id.find(w);
        if (it != word_to_id.end()) return it->second;
        int id = static_cast<int>(id_to_word.size());
        word_to_id.emplace(w, id);
        id_to_word.push_back(w);
        return id;
    }
    bool contains(const std::string& w) const { return word_to_id.count(w) != 0; }
    int id(const std::string& w) const {
        auto it = word_to_id.find(w);
        if (it == word_to_id.end()) throw DomainError("word not in vocabulary: " + w);
        return it->second;
    }
    int size() const { return static_cast<int>(id_to_word.size()); }
};

struct SentencePair {
    std::vector<std::string> source_tokens;
    std::vector<std::string> target_tokens;
};

struct Corpus {
    std::vector<SentencePair> pairs;
    Vocabulary source_vocab;
    Vocabulary target_vocab;

    static Corpus from_pairs(std::vector<SentencePair> ps) {
        Corpus c;
        c.pairs = std::move(ps);
        for (const auto& p : c.pairs) {
            for (const auto& w : p.source_tokens) c.source_vocab.add(w);
            for (const auto& w : p.target_tokens) c.target_vocab.add(w);
        }
        return c;
    }
};

namespace detail {

// Minimal UTF-8 decode; invalid sequences are skipped (tokenize never throws).
inline std::vector<char32_t> decode_utf8(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        unsigned char c = s[i];
        char32_t cp = 0;
        size_t len = 1;
        if (c < 0x80) {
            cp = c;
        } else if ((c >> 5) == 0x6) {
            cp = c & 0x1f;
            len = 2;
        } else if ((c >> 4) == 0xe) {
            cp = c & 0x0f;
            len = 3;
        } else if ((c >> 3) == 0x1e) {
            cp = c & 0x07;
            len = 4;
        } else {
            ++i;
            continue;
        }
        if (i + len > s.size()) break;
        bool ok = true;
        for (size_t k = 1; k < len; ++k) {
            unsigned char cc = s[i + k];
            if ((cc >> 6) != 0x2) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (cc & 0x3f);
        }
        i += len;
        if (ok) out.push_back(cp);
    }
    return out;
}

inline void encode_utf8(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xc0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xe0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    } else {
        out += static_cast<char>(0xf0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
        out += static_cast<char>(0x80 | (cp & 0x3f));
    }
}

// NFC composition for the combining marks that occur in Western-European
// text (acute, grave, tilde, diaeresis, cedilla). Unmatched marks vanish.
inline char32_t compose(char32_t base, char32_t mark) {
    auto pick = [&](std::string_view lower, std::string_view upper,
                    std::u32string_view lo_out, std::u32string_view up_out) -> char32_t {
        for (size_t k = 0; k < lower.size(); ++k)
            if (base == static_cast<char32_t>(lower[k])) return lo_out[k];
        for (size_t k = 0; k < upper.size(); ++k)
            if (base == static_cast<char32_t>(upper[k])) return up_out[k];
        return 0;
    };
    switch (mark) {
        case 0x0301: return pick("aeiouy", "AEIOUY", U"áéíóúý", U"ÁÉÍÓÚÝ");
        case 0x0300: return pick("aeiou", "AEIOU", U"àèìòù", U"ÀÈÌÒÙ");
        case 0x0303: return pick("ano", "ANO", U"ãñõ", U"ÃÑÕ");
        case 0x0308: return pick("aeiou", "AEIOU", U"äëïöü", U"ÄËÏÖÜ");
        case 0x0327: return pick("c", "C", U"ç", U"Ç");
        default: return 0;
    }
}

inline bool is_combining_mark(char32_t cp) { return cp >= 0x0300 && cp <= 0x036f; }

inline char32_t to_lower(char32_t cp) {
    if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
    if (cp >= 0xc0 && cp <= 0xde && cp != 0xd7) return cp + 0x20;  // Latin-1 capitals
    return cp;
}

inline bool is_space(char32_t cp) {
    return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' ||
           cp == U'\v' || cp == 0xa0;
}

// Token characters: lowercase ASCII letters/digits plus Latin-1 letters.
// Everything else counts as punctuation and is dropped in place.
inline bool is_word_char(char32_t cp) {
    if (cp >= U'a' && cp <= U'z') return true;
    if (cp >= U'0' && cp <= U'9') return true;
    if (cp >= 0xdf && cp <= 0xff && cp != 0xf7) return true;
    return false;
}

}  // namespace detail

inline std::vector<std::string> tokenize(std::string_view raw) {
    std::vector<char32_t> cps = detail::decode_utf8(raw);

    // NFC pass: fold combining marks into the preceding base character.
    std::vector<char32_t> nfc;
    nfc.reserve(cps.size());
    for (char32_t cp : cps) {
        if (detail::is_combining_mark(cp) && !nfc.empty()) {
            if (char32_t comp = detail::compose(nfc.back(), cp)) {
                nfc.back() = comp;
                continue;
            }
            continue;  // unknown mark: drop it
        }
        nfc.push_back(cp);
    }

    std::vector<std::string> tokens;
    std::string cur;
    for (char32_t cp : nfc) {
        cp = detail::to_lower(cp);
        if (detail::is_space(cp)) {
            if (!cur.empty()) tokens.push_back(std::exchange(cur, {}));
        } else if (detail::is_word_char(cp)) {
            detail::encode_utf8(cp, cur);
        }
        // punctuation: removed without splitting the token ("don't" -> "dont")
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

// TSV loader: `<source>\t<target>[\t<attribution>]` per line. Pairs that
// tokenize to different lengths (or to nothing) are dropped; survivors keep
// file order. `max_pairs` caps the number of KEPT pairs.
inline Corpus load_parallel_corpus(const std::string& path,
                                   std::optional<size_t> max_pairs = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus file: " + path);

    std::vector<SentencePair> kept;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        size_t tab1 = line.find('\t');
        if (tab1 == std::string::npos)
            throw ParseError("corpus line " + std::to_string(lineno) +
                             ": expected at least 2 tab-separated fields");
        size_t tab2 = line.find('\t', tab1 + 1);
        std::string src = line.substr(0, tab1);
        std::string tgt = tab2 == std::string::npos ? line.substr(tab1 + 1)
                                                    : line.substr(tab1 + 1, tab2 - tab1 - 1);
        SentencePair p{tokenize(src), tokenize(tgt)};
        if (p.source_tokens.empty() || p.target_tokens.empty()) continue;
        if (p.source_tokens.size() != p.target_tokens.size()) continue;
        kept.push_back(std::move(p));
        if (max_pairs && kept.size() >= *max_pairs) break;
    }
    return Corpus::from_pairs(std::move(kept));
}

struct SplitRatios {
    double train, val, test;
};

// Deterministic split: Fisher–Yates over indices with mt19937_64(seed), then
// cumulative rounded boundaries; original pair order preserved inside splits.
struct CorpusSplits {
    Corpus train, val, test;
};

inline CorpusSplits split_corpus(const Corpus& corpus, SplitRatios ratios, std::uint64_t seed) {
    if (!(ratios.train > 0 && ratios.val > 0 && ratios.test > 0))
        throw ConfigError("split ratios must be positive");
    double sum = ratios.train + ratios.val + ratios.test;
    if (std::abs(sum - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1 (got " + std::to_string(sum) + ")");

    const size_t n = corpus.pairs.size();
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 gen(seed);
    for (size_t i = n; i > 1; --i) {
        size_t j = static_cast<size_t>(gen() % i);
        std::swap(idx[i - 1], idx[j]);
    }

    auto b1 = static_cast<size_t>(std::llround(static_cast<double>(n) * ratios.train));
    auto b2 = static_cast<size_t>(
        std::llround(static_cast<double>(n) * (ratios.train + ratios.val)));
    b1 = std::min(b1, n);
    b2 = std::clamp(b2, b1, n);

    auto take = [&](size_t lo, size_t hi) {
        std::vector<size_t> part(idx.begin() + lo, idx.begin() + hi);
        std::sort(part.begin(), part.end());
        std::vector<SentencePair> ps;
        ps.reserve(part.size());
        for (size_t k : part) ps.push_back(corpus.pairs[k]);
        return Corpus::from_pairs(std::move(ps));
    };
    return CorpusSplits{take(0, b1), take(b1, b2), take(b2, n)};
}

}  // namespace nmtmask
