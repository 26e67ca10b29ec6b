#pragma once

// Synthetic bilingual world for tests: a word-by-word cipher between two
// toy languages whose embeddings are built from orthogonal Hadamard rows.
// Construction guarantees, exactly:
//   cos(en_k, es_k) = 1/sqrt(1+eta^2)  (~0.92 for eta = 0.42)  -> twin edges
//   cos(any other pair)              in {0, eta/sqrt(1+eta^2)} -> never >= 0.79
// so the 0.79 similarity graph contains precisely the twin pairs, and every
// target word's only neighbor is its source twin.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Core>

#include "nmtmask/common.hpp"
#include "nmtmask/corpus.hpp"
#include "nmtmask/embeddings.hpp"

namespace toyworld {

inline std::filesystem::path make_temp_dir(const std::string& tag) {
    static int counter = 0;
    auto dir = std::filesystem::temp_directory_path() /
               ("nmtmask-" + tag + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter++));
    std::filesystem::create_directories(dir);
    return dir;
}

struct World {
    int emb_dim = 32;
    int num_concepts = 16;
    std::vector<std::string> src_words, tgt_words;
    std::vector<Eigen::VectorXd> src_vecs, tgt_vecs;
    std::filesystem::path dir;
    std::string corpus_path, embeddings_path;
};

// Sylvester Hadamard matrix of order 32: rows are mutually orthogonal.
inline Eigen::MatrixXd hadamard32() {
    Eigen::MatrixXd H(1, 1);
    H(0, 0) = 1.0;
    while (H.rows() < 32) {
        Eigen::MatrixXd H2(2 * H.rows(), 2 * H.cols());
        H2 << H, H, H, -H;
        H = std::move(H2);
    }
    return H;
}

struct WorldOptions {
    int pairs = 3000;
    int min_len = 4, max_len = 15;
    double eta = 0.42;  // twin noise; cos(src, tgt twin) = 1/sqrt(1+eta^2)
    // Chance of transposing each adjacent target pair: local reordering, the
    // way real language pairs diverge.  0 keeps the cipher strictly monotone.
    double swap_prob = 0.0;
    // Probability that each word is drawn fresh instead of following the
    // cyclic successor (k+1 mod num_concepts).  1 keeps words iid; lower
    // values give sentences predictable local structure, like real text.
    double jump_prob = 1.0;
    std::uint64_t seed = 1234;
};

inline World make_world(const WorldOptions& opt = {}) {
    World w;
    w.dir = make_temp_dir("world");
    Eigen::MatrixXd H = hadamard32();
    const double inv = 1.0 / std::sqrt(32.0);

    for (int k = 0; k < w.num_concepts; ++k) {
        std::string num = (k < 10 ? "0" : "") + std::to_string(k);
        w.src_words.push_back("en" + num);
        w.tgt_words.push_back("es" + num);
        Eigen::VectorXd c = H.row(k).transpose() * inv;
        Eigen::VectorXd u = H.row(16 + k).transpose() * inv;
        w.src_vecs.push_back(c);
        w.tgt_vecs.push_back((c + opt.eta * u) / std::sqrt(1.0 + opt.eta * opt.eta));
    }

    w.embeddings_path = (w.dir / "vectors.txt").string();
    {
        std::ofstream out(w.embeddings_path, std::ios::binary);
        out << 2 * w.num_concepts << " " << w.emb_dim << "\n";
        char buf[64];
        auto dump = [&](const std::string& word, const Eigen::VectorXd& v) {
            out << word;
            for (int i = 0; i < v.size(); ++i) {
                std::snprintf(buf, sizeof(buf), " %.17g", v(i));
                out << buf;
            }
            out << "\n";
        };
        for (int k = 0; k < w.num_concepts; ++k) dump(w.src_words[k], w.src_vecs[k]);
        for (int k = 0; k < w.num_concepts; ++k) dump(w.tgt_words[k], w.tgt_vecs[k]);
    }

    w.corpus_path = (w.dir / "corpus.tsv").string();
    {
        std::ofstream out(w.corpus_path, std::ios::binary);
        nmtmask::Rng rng(opt.seed);
        for (int n = 0; n < opt.pairs; ++n) {
            int len = opt.min_len +
                      static_cast<int>(rng.index(opt.max_len - opt.min_len + 1));
            std::vector<int> ks(len);
            for (int i = 0; i < len; ++i) {
                if (i == 0 || opt.jump_prob >= 1.0 || rng.unit() < opt.jump_prob)
                    ks[i] = static_cast<int>(rng.index(w.num_concepts));
                else
                    ks[i] = (ks[i - 1] + 1) % w.num_concepts;
            }
            std::vector<int> order(len);
            for (int i = 0; i < len; ++i) order[i] = i;
            for (int i = 0; i + 1 < len; ++i)
                if (opt.swap_prob > 0 && rng.unit() < opt.swap_prob) {
                    std::swap(order[i], order[i + 1]);
                    ++i;  // non-overlapping transpositions
                }
            std::string src, tgt;
            for (int i = 0; i < len; ++i) {
                if (i) {
                    src += ' ';
                    tgt += ' ';
                }
                src += w.src_words[ks[i]];
                tgt += w.tgt_words[ks[order[i]]];
            }
            out << src << "\t" << tgt << "\n";
        }
    }
    return w;
}

// A minimal config file for CLI-level runs against this world.
inline std::string write_config(const World& w, const std::filesystem::path& out_dir,
                                const std::string& extra = "") {
    auto path = w.dir / ("config-" + std::to_string(std::hash<std::string>{}(extra) % 10000) +
                         ".cfg");
    std::ofstream out(path);
    out << "corpus.path = " << w.corpus_path << "\n";
    out << "embeddings.path = " << w.embeddings_path << "\n";
    out << "embeddings.dim = " << w.emb_dim << "\n";
    out << "out.dir = " << out_dir.string() << "\n";
    out << extra;
    return path.string();
}

}  // namespace toyworld
