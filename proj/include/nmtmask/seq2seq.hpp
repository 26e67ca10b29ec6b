#pragma once

// Encoder–decoder LSTM with a Bahdanau additive-attention head. Forward
// passes, teacher-forced training with hand-written BPTT, and export of
// attention matrices for the election/fit analyses. All double precision.

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "nmtmask/common.hpp"
#include "nmtmask/corpus.hpp"
#include "nmtmask/embeddings.hpp"

namespace nmtmask {

using Mat = Eigen::MatrixXd;

namespace detail {

inline Vec sigmoid(const Vec& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

}  // namespace detail

// Single LSTM cell; W is (4h x (in+h)) with gate rows ordered [i; f; g; o].
struct LstmParams {
    int in = 0, hidden = 0;
    Mat W;
    Vec b;
};

struct LstmCache {
    Vec xh, i, f, g, o, c, tanh_c, c_prev;
};

inline void lstm_forward(const LstmParams& P, const Vec& x, const Vec& h_prev,
                         const Vec& c_prev, Vec& h_out, Vec& c_out,
                         LstmCache* cache = nullptr) {
    const int h = P.hidden;
    Vec xh(P.in + h);
    xh << x, h_prev;
    Vec z = P.W * xh + P.b;
    Vec gi = detail::sigmoid(z.segment(0, h));
    Vec gf = detail::sigmoid(z.segment(h, h));
    Vec gg = z.segment(2 * h, h).array().tanh().matrix();
    Vec go = detail::sigmoid(z.segment(3 * h, h));
    c_out = gf.cwiseProduct(c_prev) + gi.cwiseProduct(gg);
    Vec tc = c_out.array().tanh().matrix();
    h_out = go.cwiseProduct(tc);
    if (cache) *cache = LstmCache{std::move(xh), std::move(gi), std::move(gf),
                                  std::move(gg), std::move(go), c_out, std::move(tc), c_prev};
}

struct LstmGrads {
    Mat dW;
    Vec db;
};

inline void lstm_backward(const LstmParams& P, const LstmCache& K, const Vec& dh,
                          const Vec& dc_in, LstmGrads& G, Vec* dx, Vec& dh_prev,
                          Vec& dc_prev) {
    const int h = P.hidden;
    Vec do_ = dh.cwiseProduct(K.tanh_c);
    Vec dtc = dh.cwiseProduct(K.o).cwiseProduct(
                  (1.0 - K.tanh_c.array().square()).matrix()) +
              dc_in;
    Vec di = dtc.cwiseProduct(K.g);
    Vec df = dtc.cwiseProduct(K.c_prev);
    Vec dg = dtc.cwiseProduct(K.i);
    dc_prev = dtc.cwiseProduct(K.f);

    Vec dz(4 * h);
    dz.segment(0, h) = di.cwiseProduct(K.i).cwiseProduct((1.0 - K.i.array()).matrix());
    dz.segment(h, h) = df.cwiseProduct(K.f).cwiseProduct((1.0 - K.f.array()).matrix());
    dz.segment(2 * h, h) = dg.cwiseProduct((1.0 - K.g.array().square()).matrix());
    dz.segment(3 * h, h) = do_.cwiseProduct(K.o).cwiseProduct((1.0 - K.o.array()).matrix());

    G.dW.noalias() += dz * K.xh.transpose();
    G.db += dz;
    Vec dxh = P.W.transpose() * dz;
    if (dx) *dx = dxh.segment(0, P.in);
    dh_prev = dxh.segment(P.in, h);
}

struct EncoderStates {
    std::vector<Vec> states;  // h_1..h_p, one per input position
    Vec final_h, final_c;     // seeds the decoder
};

enum class Normalization { softmax, max };

struct AttentionMatrix {
    Mat weights;  // row = output position (voter), col = input position (candidate)
    Normalization normalization = Normalization::softmax;
};

struct Seq2SeqModel {
    int hidden_dim = 0, align_dim = 0, emb_dim = 0;
    LstmParams enc, dec;
    Mat Wa, Ua;  // align_dim x hidden_dim
    Vec va;      // align_dim
    Mat Wout;    // emb_dim x hidden_dim
    Vec bout;    // emb_dim

    static Seq2SeqModel init(int emb_dim, int hidden_dim, int align_dim,
                             std::uint64_t seed) {
        Seq2SeqModel m;
        m.emb_dim = emb_dim;
        m.hidden_dim = hidden_dim;
        m.align_dim = align_dim;
        m.enc = LstmParams{emb_dim, hidden_dim, Mat(4 * hidden_dim, emb_dim + hidden_dim),
                           Vec(4 * hidden_dim)};
        m.dec = LstmParams{emb_dim + hidden_dim, hidden_dim,
                           Mat(4 * hidden_dim, emb_dim + 2 * hidden_dim), Vec(4 * hidden_dim)};
        m.Wa = Mat(align_dim, hidden_dim);
        m.Ua = Mat(align_dim, hidden_dim);
        m.va = Vec(align_dim);
        m.Wout = Mat(emb_dim, hidden_dim);
        m.bout = Vec(emb_dim);
        Rng rng(seed);
        for (auto& t : m.tensors()) {
            for (Eigen::Index k = 0; k < t.size; ++k) t.data[k] = rng.uniform(-0.08, 0.08);
        }
        return m;
    }

    struct TensorView {
        std::string name;
        double* data;
        Eigen::Index size, rows, cols;
    };
    std::vector<TensorView> tensors() {
        auto mv = [](const char* n, Mat& M) {
            return TensorView{n, M.data(), M.size(), M.rows(), M.cols()};
        };
        auto vv = [](const char* n, Vec& V) {
            return TensorView{n, V.data(), V.size(), V.size(), 1};
        };
        return {mv("enc.W", enc.W),  vv("enc.b", enc.b), mv("dec.W", dec.W),
                vv("dec.b", dec.b),  mv("att.Wa", Wa),   mv("att.Ua", Ua),
                vv("att.va", va),    mv("out.W", Wout),  vv("out.b", bout)};
    }
};

// Gradient container mirroring the model's tensor list one-to-one.
struct Seq2SeqGrads {
    LstmGrads enc, dec;
    Mat dWa, dUa;
    Vec dva;
    Mat dWout;
    Vec dbout;

    static Seq2SeqGrads zeros_like(const Seq2SeqModel& m) {
        Seq2SeqGrads g;
        g.enc = {Mat::Zero(m.enc.W.rows(), m.enc.W.cols()), Vec::Zero(m.enc.b.size())};
        g.dec = {Mat::Zero(m.dec.W.rows(), m.dec.W.cols()), Vec::Zero(m.dec.b.size())};
        g.dWa = Mat::Zero(m.Wa.rows(), m.Wa.cols());
        g.dUa = Mat::Zero(m.Ua.rows(), m.Ua.cols());
        g.dva = Vec::Zero(m.va.size());
        g.dWout = Mat::Zero(m.Wout.rows(), m.Wout.cols());
        g.dbout = Vec::Zero(m.bout.size());
        return g;
    }
    std::vector<double*> blocks() {
        return {enc.dW.data(), enc.db.data(), dec.dW.data(), dec.db.data(), dWa.data(),
                dUa.data(),    dva.data(),    dWout.data(),  dbout.data()};
    }
    std::vector<Eigen::Index> block_sizes() const {
        return {enc.dW.size(), enc.db.size(), dec.dW.size(), dec.db.size(), dWa.size(),
                dUa.size(),    dva.size(),    dWout.size(),  dbout.size()};
    }
    double squared_norm() {
        double s = 0;
        auto bs = blocks();
        auto sz = block_sizes();
        for (size_t k = 0; k < bs.size(); ++k)
            for (Eigen::Index i = 0; i < sz[k]; ++i) s += bs[k][i] * bs[k][i];
        return s;
    }
    void scale(double a) {
        auto bs = blocks();
        auto sz = block_sizes();
        for (size_t k = 0; k < bs.size(); ++k)
            for (Eigen::Index i = 0; i < sz[k]; ++i) bs[k][i] *= a;
    }
};

inline EncoderStates encode(const Seq2SeqModel& model, const EmbeddingTable& table,
                            const std::vector<std::string>& tokens) {
    EncoderStates enc;
    Vec h = Vec::Zero(model.hidden_dim), c = Vec::Zero(model.hidden_dim);
    enc.states.reserve(tokens.size());
    for (const auto& w : tokens) {
        Vec h_new, c_new;
        lstm_forward(model.enc, table.at(w), h, c, h_new, c_new);
        h = std::move(h_new);
        c = std::move(c_new);
        enc.states.push_back(h);
    }
    enc.final_h = h;
    enc.final_c = c;
    return enc;
}

// Alignment scores e_i = va . tanh(Wa s + Ua h_i), softmaxed over positions.
inline Vec attention_weights(const Seq2SeqModel& model, const Vec& decoder_state,
                             const EncoderStates& enc) {
    const auto p = static_cast<Eigen::Index>(enc.states.size());
    Vec Was = model.Wa * decoder_state;
    Vec e(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        Vec t = (Was + model.Ua * enc.states[i]).array().tanh().matrix();
        e(i) = model.va.dot(t);
    }
    Vec a = (e.array() - e.maxCoeff()).exp().matrix();
    return a / a.sum();
}

struct DecoderState {
    Vec h, c;
};

inline std::pair<DecoderState, Vec> decode_step(const Seq2SeqModel& model,
                                                const Vec& prev_output_embedding,
                                                const Vec& context,
                                                const DecoderState& state) {
    Vec u(model.emb_dim + model.hidden_dim);
    u << prev_output_embedding, context;
    DecoderState ns;
    lstm_forward(model.dec, u, state.h, state.c, ns.h, ns.c);
    Vec y = model.Wout * ns.h + model.bout;
    return {std::move(ns), std::move(y)};
}

namespace detail {

// Teacher-forced forward over one pair, keeping every intermediate needed by
// the backward pass. Decoder step j queries attention with the previous
// decoder hidden (init = encoder final) and consumes [gold_{j-1}; context_j].
struct PairTrace {
    std::vector<Vec> src_emb, gold_emb;
    std::vector<LstmCache> enc_cache;
    std::vector<Vec> enc_h;  // enc_h[0] = 0, enc_h[i+1] = state after token i
    std::vector<LstmCache> dec_cache;
    std::vector<Vec> dec_h, dec_c;  // dec_h[0] = encoder final h
    std::vector<Mat> att_tanh;      // per step: align_dim x p
    std::vector<Vec> alpha, ctx, yhat;
    std::vector<double> cosines;
    double loss = 0.0;
};

inline PairTrace forward_pair(const Seq2SeqModel& model, const SentencePair& pair,
                              const EmbeddingTable& table) {
    const auto p = static_cast<Eigen::Index>(pair.source_tokens.size());
    const int hd = model.hidden_dim;
    PairTrace T;
    for (const auto& w : pair.source_tokens) T.src_emb.push_back(table.at(w));
    for (const auto& w : pair.target_tokens) T.gold_emb.push_back(table.at(w));

    T.enc_h.assign(1, Vec::Zero(hd));
    Vec c = Vec::Zero(hd);
    T.enc_cache.resize(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        Vec h_new, c_new;
        lstm_forward(model.enc, T.src_emb[i], T.enc_h.back(), c, h_new, c_new,
                     &T.enc_cache[i]);
        T.enc_h.push_back(std::move(h_new));
        c = std::move(c_new);
    }

    T.dec_h.assign(1, T.enc_h.back());
    T.dec_c.assign(1, c);
    T.dec_cache.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const Vec& s = T.dec_h.back();
        Vec Was = model.Wa * s;
        Mat tanh_ij(model.align_dim, p);
        Vec e(p);
        for (Eigen::Index i = 0; i < p; ++i) {
            tanh_ij.col(i) = (Was + model.Ua * T.enc_h[i + 1]).array().tanh().matrix();
            e(i) = model.va.dot(tanh_ij.col(i));
        }
        Vec a = (e.array() - e.maxCoeff()).exp().matrix();
        a /= a.sum();
        Vec ctx = Vec::Zero(hd);
        for (Eigen::Index i = 0; i < p; ++i) ctx += a(i) * T.enc_h[i + 1];

        Vec u(model.emb_dim + hd);
        u << (j == 0 ? Vec(Vec::Zero(model.emb_dim)) : T.gold_emb[j - 1]), ctx;
        Vec h_new, c_new;
        lstm_forward(model.dec, u, T.dec_h.back(), T.dec_c.back(), h_new, c_new,
                     &T.dec_cache[j]);
        T.dec_h.push_back(std::move(h_new));
        T.dec_c.push_back(std::move(c_new));

        Vec y = model.Wout * T.dec_h.back() + model.bout;
        double cosv = cosine_similarity(y, T.gold_emb[j]);
        T.loss += 1.0 - cosv;
        T.att_tanh.push_back(std::move(tanh_ij));
        T.alpha.push_back(std::move(a));
        T.ctx.push_back(std::move(ctx));
        T.yhat.push_back(std::move(y));
        T.cosines.push_back(cosv);
    }
    return T;
}

inline void backward_pair(const Seq2SeqModel& model, const PairTrace& T,
                          Seq2SeqGrads& G) {
    const auto p = static_cast<Eigen::Index>(T.alpha.size());
    const int hd = model.hidden_dim;
    std::vector<Vec> dH(p, Vec::Zero(hd));  // grads wrt encoder states h_1..h_p
    Vec dh_next = Vec::Zero(hd), dc_next = Vec::Zero(hd);

    for (Eigen::Index j = p - 1; j >= 0; --j) {
        // Loss path: d(1 - cos(y, g))/dy = -(g_hat - cos * y_hat) / |y|.
        const Vec& y = T.yhat[j];
        const Vec& g = T.gold_emb[j];
        double ny = y.norm(), ng = g.norm();
        Vec dy = -((g / (ny * ng)) - T.cosines[j] * y / (ny * ny));

        G.dWout.noalias() += dy * T.dec_h[j + 1].transpose();
        G.dbout += dy;
        Vec dh = dh_next + model.Wout.transpose() * dy;

        Vec du, dh_prev, dc_prev;
        lstm_backward(model.dec, T.dec_cache[j], dh, dc_next, G.dec, &du, dh_prev,
                      dc_prev);
        Vec dctx = du.segment(model.emb_dim, hd);  // du's embedding slice is input data

        // Context sum and softmax.
        const Vec& a = T.alpha[j];
        Vec dalpha(p);
        for (Eigen::Index i = 0; i < p; ++i) {
            dalpha(i) = T.enc_h[i + 1].dot(dctx);
            dH[i] += a(i) * dctx;
        }
        Vec de = a.cwiseProduct(dalpha - Vec::Constant(p, a.dot(dalpha)));

        // Additive alignment: e_i = va . tanh(Wa s + Ua h_i).
        Vec dpre_sum = Vec::Zero(model.align_dim);
        for (Eigen::Index i = 0; i < p; ++i) {
            Vec t = T.att_tanh[j].col(i);
            G.dva += de(i) * t;
            Vec dpre = (de(i) * model.va.array() * (1.0 - t.array().square())).matrix();
            G.dUa.noalias() += dpre * T.enc_h[i + 1].transpose();
            dH[i] += model.Ua.transpose() * dpre;
            dpre_sum += dpre;
        }
        G.dWa.noalias() += dpre_sum * T.dec_h[j].transpose();
        Vec ds_query = model.Wa.transpose() * dpre_sum;

        dh_next = dh_prev + ds_query;  // both flow into the previous decoder hidden
        dc_next = dc_prev;
    }

    // Decoder init state was the encoder final (h, c).
    Vec dh_rec = dh_next, dc_rec = dc_next;
    for (Eigen::Index i = p - 1; i >= 0; --i) {
        Vec dh = dH[i] + dh_rec;
        Vec dh_prev, dc_prev;
        lstm_backward(model.enc, T.enc_cache[i], dh, dc_rec, G.enc, nullptr, dh_prev,
                      dc_prev);
        dh_rec = std::move(dh_prev);
        dc_rec = std::move(dc_prev);
    }
}

}  // namespace detail

// Per-pair training loss (sum of 1 - cos over positions); used directly by
// the finite-difference gradient checks.
inline double pair_loss(const Seq2SeqModel& model, const SentencePair& pair,
                        const EmbeddingTable& table) {
    return detail::forward_pair(model, pair, table).loss;
}

inline Seq2SeqGrads pair_gradients(const Seq2SeqModel& model, const SentencePair& pair,
                                   const EmbeddingTable& table, double* loss = nullptr) {
    auto T = detail::forward_pair(model, pair, table);
    auto G = Seq2SeqGrads::zeros_like(model);
    detail::backward_pair(model, T, G);
    if (loss) *loss = T.loss;
    return G;
}

struct TrainHyper {
    double lr = 0.05;
    int epochs = 10;
    std::uint64_t seed = 0;
    double grad_clip = 5.0;
};

// Plain SGD, one pair per step, global-norm gradient clipping. Returns the
// per-epoch mean pair loss.
inline std::vector<double> train(Seq2SeqModel& model, const Corpus& corpus,
                                 const EmbeddingTable& table, const TrainHyper& hyper) {
    if (corpus.pairs.empty()) throw DomainError("train: empty corpus");
    Rng rng(hyper.seed);
    std::vector<size_t> order(corpus.pairs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<double> trace;
    trace.reserve(hyper.epochs);
    auto views = model.tensors();
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (size_t k : order) {
            double loss = 0.0;
            auto G = pair_gradients(model, corpus.pairs[k], table, &loss);
            if (!std::isfinite(loss))
                throw DomainError("train: non-finite loss at epoch " +
                                  std::to_string(epoch) + ", pair " + std::to_string(k));
            epoch_loss += loss;

            double norm = std::sqrt(G.squared_norm());
            if (hyper.grad_clip > 0 && norm > hyper.grad_clip)
                G.scale(hyper.grad_clip / norm);
            auto blocks = G.blocks();
            auto sizes = G.block_sizes();
            for (size_t t = 0; t < views.size(); ++t)
                for (Eigen::Index i = 0; i < sizes[t]; ++i)
                    views[t].data[i] -= hyper.lr * blocks[t][i];
        }
        trace.push_back(epoch_loss / static_cast<double>(corpus.pairs.size()));
    }
    return trace;
}

// Teacher-forced attention rows for every pair; `max` divides each row by its
// own maximum (the form consumed by the election and Gaussian-fit analyses).
inline std::vector<AttentionMatrix> export_attention(const Seq2SeqModel& model,
                                                     const Corpus& corpus,
                                                     const EmbeddingTable& table,
                                                     Normalization normalization) {
    std::vector<AttentionMatrix> out;
    out.reserve(corpus.pairs.size());
    for (const auto& pair : corpus.pairs) {
        auto T = detail::forward_pair(model, pair, table);
        const auto p = static_cast<Eigen::Index>(T.alpha.size());
        Mat W(p, p);
        for (Eigen::Index j = 0; j < p; ++j) {
            Vec row = T.alpha[j];
            if (normalization == Normalization::max) row /= row.maxCoeff();
            W.row(j) = row.transpose();
        }
        out.push_back(AttentionMatrix{std::move(W), normalization});
    }
    return out;
}

}  // namespace nmtmask
