#include "lwal/encoder.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>

#include "lwal/errors.hpp"

namespace lwal {

namespace {

constexpr char kMagic[4] = {'A', 'L', 'B', 'L'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    b[0] = static_cast<unsigned char>(v & 0xff);
    b[1] = static_cast<unsigned char>((v >> 8) & 0xff);
    b[2] = static_cast<unsigned char>((v >> 16) & 0xff);
    b[3] = static_cast<unsigned char>((v >> 24) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) {
        throw DataError("checkpoint truncated while reading u32");
    }
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) {
        b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    }
    os.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) {
        throw DataError("checkpoint truncated while reading f64");
    }
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    }
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

} // namespace

void EncoderConfig::validate() const {
    if (input_dim == 0 || latent_dim == 0) {
        throw ConfigError("encoder dimensions must be positive");
    }
    for (std::size_t h : hidden_layers) {
        if (h == 0) {
            throw ConfigError("hidden layer width must be positive");
        }
    }
    if (head_l2 < 0.0) {
        throw ConfigError("head_l2 must be nonnegative");
    }
}

std::size_t EncoderParams::input_dim() const {
    return weights.empty() ? 0 : weights.front().rows();
}

std::size_t EncoderParams::latent_dim() const {
    return weights.empty() ? 0 : weights.back().cols();
}

bool EncoderParams::all_finite() const {
    for (const Tensor& w : weights) {
        if (!w.all_finite()) return false;
    }
    for (const Tensor& b : biases) {
        if (!b.all_finite()) return false;
    }
    return true;
}

EncoderParams init_encoder(const EncoderConfig& cfg) {
    cfg.validate();
    std::vector<std::size_t> dims;
    dims.push_back(cfg.input_dim);
    for (std::size_t h : cfg.hidden_layers) dims.push_back(h);
    dims.push_back(cfg.latent_dim);

    std::mt19937_64 rng(cfg.init_seed);
    EncoderParams params;
    params.head_l2 = cfg.head_l2;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const std::size_t fan_in = dims[l], fan_out = dims[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Tensor w({fan_in, fan_out});
        for (std::size_t i = 0; i < w.numel(); ++i) {
            w[i] = dist(rng);
        }
        params.weights.push_back(std::move(w));
        params.biases.push_back(Tensor::zeros({fan_out}));
    }
    return params;
}

Tensor encoder_forward(const EncoderParams& params, const Tensor& x) {
    if (params.weights.empty()) {
        throw ConfigError("encoder has no layers");
    }
    if (x.ndim() != 2 || x.cols() != params.input_dim()) {
        throw ShapeError("encoder_forward: feature dimension mismatch");
    }
    Tape tape;
    EncoderVars vars;
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        vars.weights.push_back(tape.leaf(params.weights[l]));
        vars.biases.push_back(tape.leaf(params.biases[l]));
    }
    Var out = encoder_forward(tape, vars, tape.leaf(x));
    return tape.value(out);
}

EncoderVars params_to_tape(Tape& tape, const EncoderParams& params) {
    EncoderVars vars;
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        vars.weights.push_back(tape.leaf(params.weights[l], /*requires_grad=*/true));
        vars.biases.push_back(tape.leaf(params.biases[l], /*requires_grad=*/true));
    }
    return vars;
}

Var encoder_forward(Tape& tape, const EncoderVars& vars, Var x) {
    if (vars.weights.empty()) {
        throw ConfigError("encoder has no layers");
    }
    Var h = x;
    for (std::size_t l = 0; l < vars.weights.size(); ++l) {
        h = tape.add_rowvec(tape.matmul(h, vars.weights[l]), vars.biases[l]);
        if (l + 1 < vars.weights.size()) {
            h = tape.relu(h);
        }
    }
    return h;
}

double l2_penalty(const EncoderParams& params) {
    if (params.weights.empty()) {
        return 0.0;
    }
    const Tensor& head = params.weights.back();
    double s = 0.0;
    for (std::size_t i = 0; i < head.numel(); ++i) {
        s += head[i] * head[i];
    }
    return params.head_l2 * s;
}

Var l2_penalty(Tape& tape, const EncoderVars& vars, double head_l2) {
    Var head = vars.weights.back();
    return tape.scale(tape.sum(tape.mul(head, head)), head_l2);
}

void save_checkpoint(const EncoderParams& params, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw DataError("cannot open checkpoint file for writing: " + path);
    }
    os.write(kMagic, 4);
    write_u32(os, kFormatVersion);
    write_u32(os, static_cast<std::uint32_t>(params.num_layers()));
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        const Tensor& w = params.weights[l];
        write_u32(os, static_cast<std::uint32_t>(w.rows()));
        write_u32(os, static_cast<std::uint32_t>(w.cols()));
        for (std::size_t i = 0; i < w.numel(); ++i) {
            write_f64(os, w[i]);
        }
        const Tensor& b = params.biases[l];
        for (std::size_t i = 0; i < b.numel(); ++i) {
            write_f64(os, b[i]);
        }
    }
    if (!os) {
        throw DataError("failed writing checkpoint: " + path);
    }
}

EncoderParams load_checkpoint(const std::string& path, double head_l2) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw DataError("cannot open checkpoint file: " + path);
    }
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("bad checkpoint magic: " + path);
    }
    const std::uint32_t version = read_u32(is);
    if (version != kFormatVersion) {
        throw DataError("unsupported checkpoint version");
    }
    const std::uint32_t layers = read_u32(is);
    EncoderParams params;
    params.head_l2 = head_l2;
    for (std::uint32_t l = 0; l < layers; ++l) {
        const std::uint32_t rows = read_u32(is);
        const std::uint32_t cols = read_u32(is);
        if (rows == 0 || cols == 0) {
            throw DataError("checkpoint layer with zero dimension");
        }
        Tensor w({rows, cols});
        for (std::size_t i = 0; i < w.numel(); ++i) {
            w[i] = read_f64(is);
        }
        Tensor b({cols});
        for (std::size_t i = 0; i < b.numel(); ++i) {
            b[i] = read_f64(is);
        }
        params.weights.push_back(std::move(w));
        params.biases.push_back(std::move(b));
    }
    return params;
}

} // namespace lwal
