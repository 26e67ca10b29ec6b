#pragma once

// Versioned binary checkpoints. Doubles are written raw (native layout), so
// a save/load round trip is bit-exact; no timestamps or other run-varying
// bytes ever enter the file (reruns must be byte-identical).

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "nmtmask/common.hpp"
#include "nmtmask/qagent.hpp"
#include "nmtmask/seq2seq.hpp"

namespace nmtmask {

namespace detail {

inline constexpr char kCkptMagic[8] = {'N', 'M', 'T', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCkptVersion = 1;
inline constexpr std::uint32_t kKindSeq2Seq = 1;
inline constexpr std::uint32_t kKindQNet = 2;

template <class T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T read_pod(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("truncated checkpoint: " + path);
    return v;
}

inline void write_string(std::ofstream& out, const std::string& s) {
    write_pod(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::string read_string(std::ifstream& in, const std::string& path) {
    auto len = read_pod<std::uint32_t>(in, path);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw FormatError("truncated checkpoint: " + path);
    return s;
}

template <class Views>
void write_tensors(std::ofstream& out, const Views& views) {
    write_pod(out, static_cast<std::uint32_t>(views.size()));
    for (const auto& t : views) {
        write_string(out, t.name);
        write_pod(out, static_cast<std::uint64_t>(t.rows));
        write_pod(out, static_cast<std::uint64_t>(t.cols));
        out.write(reinterpret_cast<const char*>(t.data),
                  static_cast<std::streamsize>(t.size * sizeof(double)));
    }
}

template <class Views>
void read_tensors(std::ifstream& in, const std::string& path, Views& views) {
    auto n = read_pod<std::uint32_t>(in, path);
    if (n != views.size()) throw FormatError("checkpoint tensor count mismatch: " + path);
    for (auto& t : views) {
        std::string name = read_string(in, path);
        auto rows = read_pod<std::uint64_t>(in, path);
        auto cols = read_pod<std::uint64_t>(in, path);
        if (name != t.name || rows != static_cast<std::uint64_t>(t.rows) ||
            cols != static_cast<std::uint64_t>(t.cols))
            throw FormatError("checkpoint tensor layout mismatch at '" + name + "': " + path);
        in.read(reinterpret_cast<char*>(t.data),
                static_cast<std::streamsize>(t.size * sizeof(double)));
        if (!in) throw FormatError("truncated checkpoint: " + path);
    }
}

inline std::ofstream open_ckpt_out(const std::string& path, std::uint32_t kind) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(kCkptMagic, sizeof(kCkptMagic));
    write_pod(out, kCkptVersion);
    write_pod(out, kind);
    return out;
}

inline std::ifstream open_ckpt_in(const std::string& path, std::uint32_t expected_kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
        throw FormatError("not a checkpoint file: " + path);
    auto version = read_pod<std::uint32_t>(in, path);
    if (version != kCkptVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version) +
                          ": " + path);
    auto kind = read_pod<std::uint32_t>(in, path);
    if (kind != expected_kind)
        throw FormatError("checkpoint holds a different model kind: " + path);
    return in;
}

}  // namespace detail

inline void save_seq2seq(const std::string& path, Seq2SeqModel& model,
                         const TrainHyper& hyper) {
    auto out = detail::open_ckpt_out(path, detail::kKindSeq2Seq);
    detail::write_pod(out, static_cast<std::int32_t>(model.emb_dim));
    detail::write_pod(out, static_cast<std::int32_t>(model.hidden_dim));
    detail::write_pod(out, static_cast<std::int32_t>(model.align_dim));
    detail::write_pod(out, hyper.lr);
    detail::write_pod(out, static_cast<std::int32_t>(hyper.epochs));
    detail::write_pod(out, static_cast<std::uint64_t>(hyper.seed));
    detail::write_pod(out, hyper.grad_clip);
    auto views = model.tensors();
    detail::write_tensors(out, views);
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

inline std::pair<Seq2SeqModel, TrainHyper> load_seq2seq(const std::string& path) {
    auto in = detail::open_ckpt_in(path, detail::kKindSeq2Seq);
    auto emb = detail::read_pod<std::int32_t>(in, path);
    auto hidden = detail::read_pod<std::int32_t>(in, path);
    auto align = detail::read_pod<std::int32_t>(in, path);
    TrainHyper hyper;
    hyper.lr = detail::read_pod<double>(in, path);
    hyper.epochs = detail::read_pod<std::int32_t>(in, path);
    hyper.seed = detail::read_pod<std::uint64_t>(in, path);
    hyper.grad_clip = detail::read_pod<double>(in, path);
    Seq2SeqModel model = Seq2SeqModel::init(emb, hidden, align, 0);
    auto views = model.tensors();
    detail::read_tensors(in, path, views);
    return {std::move(model), hyper};
}

inline void save_qnet(const std::string& path, QNetwork& net) {
    auto out = detail::open_ckpt_out(path, detail::kKindQNet);
    detail::write_pod(out, static_cast<std::int32_t>(net.input_dim()));
    auto views = net.tensors();
    detail::write_tensors(out, views);
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

inline QNetwork load_qnet(const std::string& path) {
    auto in = detail::open_ckpt_in(path, detail::kKindQNet);
    auto input_dim = detail::read_pod<std::int32_t>(in, path);
    QNetwork net = QNetwork::init(input_dim - 1, 0);
    auto views = net.tensors();
    detail::read_tensors(in, path, views);
    return net;
}

}  // namespace nmtmask
