#pragma once

// implementation detail of transformer.hpp (checkpoint serialization)

#include <array>
#include <fstream>
#include <utility>

namespace bcg2ecg {

namespace detail {

// Visits tensors in the on-disk order: Q/K/V are stored per head as
// [d_model x d_k] blocks, everything else as declared.
template <typename S, typename F>
void for_each_stored_block(ModelParams<S>& p, int n_heads, F&& f) {
    const auto d_model = static_cast<int>(p.input_w.size());
    const int dk = d_model / n_heads;
    f(p.input_w);
    f(p.input_b);
    for (auto& l : p.layers) {
        for (int h = 0; h < n_heads; ++h) {
            f(l.w_q.block(0, h * dk, d_model, dk));
            f(l.w_k.block(0, h * dk, d_model, dk));
            f(l.w_v.block(0, h * dk, d_model, dk));
        }
        f(l.w_o);
        f(l.w_ff1);
        f(l.b_ff1);
        f(l.w_ff2);
        f(l.b_ff2);
        f(l.ln1_gain);
        f(l.ln1_bias);
        f(l.ln2_gain);
        f(l.ln2_bias);
    }
    f(p.output_w);
    f(p.output_b);
}

struct CrcOstream {
    std::ofstream out;
    std::uint32_t crc = 0;

    void write(const void* data, std::size_t n) {
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        crc = crc32_update(crc, data, n);
    }
    template <typename T>
    void write_le(T v) {
        write(&v, sizeof(T));
    }
};

struct CrcIstream {
    std::ifstream in;
    std::uint32_t crc = 0;

    void read(void* data, std::size_t n, const char* what) {
        in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n)
            throw ModelError(std::string("checkpoint truncated while reading ") + what);
        crc = crc32_update(crc, data, n);
    }
    template <typename T>
    T read_le(const char* what) {
        T v{};
        read(&v, sizeof(T), what);
        return v;
    }
};

}  // namespace detail

template <typename S>
void save_checkpoint(const ModelParams<S>& params, const ModelConfig& cfg,
                     const std::filesystem::path& path) {
    cfg.validate();
    detail::CrcOstream s;
    s.out.open(path, std::ios::binary);
    if (!s.out) throw ModelError("cannot open " + path.string() + " for writing");

    s.write("BETF", 4);
    s.write_le<std::uint16_t>(1);
    for (int field : {cfg.seq_len, cfg.d_model, cfg.n_layers, cfg.n_heads, cfg.d_ff})
        s.write_le<std::uint32_t>(static_cast<std::uint32_t>(field));

    detail::for_each_stored_block(const_cast<ModelParams<S>&>(params), cfg.n_heads,
                                  [&](auto&& t) {
                                      for (Eigen::Index r = 0; r < t.rows(); ++r)
                                          for (Eigen::Index c = 0; c < t.cols(); ++c)
                                              s.write_le<float>(static_cast<float>(t(r, c)));
                                  });
    std::uint32_t crc = s.crc;
    s.out.write(reinterpret_cast<const char*>(&crc), sizeof(crc));
    if (!s.out) throw ModelError("write failed: " + path.string());
}

template <typename S>
std::pair<ModelParams<S>, ModelConfig> load_checkpoint(const std::filesystem::path& path) {
    detail::CrcIstream s;
    s.in.open(path, std::ios::binary);
    if (!s.in) throw ModelError("cannot open " + path.string());

    char magic[4];
    s.read(magic, 4, "magic");
    if (std::string_view(magic, 4) != "BETF")
        throw ModelError(path.string() + ": bad magic, not a BETF checkpoint");
    auto version = s.read_le<std::uint16_t>("version");
    if (version != 1) throw ModelError(path.string() + ": unsupported checkpoint version");

    ModelConfig cfg;
    cfg.seq_len = static_cast<int>(s.read_le<std::uint32_t>("seq_len"));
    cfg.d_model = static_cast<int>(s.read_le<std::uint32_t>("d_model"));
    cfg.n_layers = static_cast<int>(s.read_le<std::uint32_t>("n_layers"));
    cfg.n_heads = static_cast<int>(s.read_le<std::uint32_t>("n_heads"));
    cfg.d_ff = static_cast<int>(s.read_le<std::uint32_t>("d_ff"));
    cfg.validate();

    ModelParams<S> params = zero_params<S>(cfg);
    detail::for_each_stored_block(params, cfg.n_heads, [&](auto&& t) {
        for (Eigen::Index r = 0; r < t.rows(); ++r)
            for (Eigen::Index c = 0; c < t.cols(); ++c)
                t(r, c) = static_cast<S>(s.read_le<float>("tensor data"));
    });

    std::uint32_t expected = s.crc;
    std::uint32_t stored;
    s.in.read(reinterpret_cast<char*>(&stored), sizeof(stored));
    if (s.in.gcount() != sizeof(stored))
        throw ModelError(path.string() + ": checkpoint truncated before CRC");
    if (stored != expected) throw ModelError(path.string() + ": CRC mismatch, file corrupt");
    char extra;
    s.in.read(&extra, 1);
    if (s.in.gcount() != 0) throw ModelError(path.string() + ": trailing bytes after CRC");

    bool finite = true;
    for_each_tensor(params, [&](const auto& t) { finite = finite && t.allFinite(); });
    if (!finite) throw ModelError(path.string() + ": checkpoint contains non-finite values");
    return {std::move(params), cfg};
}

}  // namespace bcg2ecg
