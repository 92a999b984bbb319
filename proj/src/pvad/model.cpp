#include "duplex/pvad/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "duplex/runtime/random.hpp"

namespace duplex::pvad {
namespace {

static_assert(std::endian::native == std::endian::little, "weight IO assumes a little-endian host");

void fill_uniform(std::vector<float>& v, SeededRng& rng, double bound) {
    for (float& x : v) x = static_cast<float>(rng.uniform(-bound, bound));
}

PvadModel shaped(const PvadDims& d) {
    PvadModel m;
    std::size_t in = d.n_mels;
    for (std::size_t out : d.conv_channels) {
        CausalConv1d c;
        c.in_channels = in;
        c.out_channels = out;
        c.kernel = d.kernel;
        c.weight.assign(out * in * d.kernel, 0.0f);
        c.bias.assign(out, 0.0f);
        m.conv.push_back(std::move(c));
        in = out;
    }
    m.embedding_dim = d.embedding;
    m.gru.input = in + d.embedding;
    m.gru.hidden = d.hidden;
    m.gru.weight_ih.assign(3 * d.hidden * m.gru.input, 0.0f);
    m.gru.weight_hh.assign(3 * d.hidden * d.hidden, 0.0f);
    m.gru.bias_ih.assign(3 * d.hidden, 0.0f);
    m.gru.bias_hh.assign(3 * d.hidden, 0.0f);
    m.classifier.in = d.hidden;
    m.classifier.out = 1;
    m.classifier.weight.assign(d.hidden, 0.0f);
    m.classifier.bias.assign(1, 0.0f);
    return m;
}

void expect_size(const std::vector<float>& v, std::size_t n, const std::string& what) {
    if (v.size() != n) {
        throw std::invalid_argument(what + ": expected " + std::to_string(n) + " values, got " +
                                    std::to_string(v.size()));
    }
}

struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }

void write_tensor(std::ostream& out, const std::string& name, std::vector<std::uint32_t> dims,
                  const std::vector<float>& data) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) write_u32(out, d);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * 4));
}

bool read_exact(std::istream& in, void* dst, std::size_t n) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in.gcount()) == n;
}

std::uint32_t read_u32(std::istream& in, const char* what) {
    std::uint32_t v = 0;
    if (!read_exact(in, &v, 4)) throw std::runtime_error(std::string("pvad weights: truncated ") + what);
    return v;
}

const Tensor& need(const std::map<std::string, Tensor>& t, const std::string& name, std::size_t rank) {
    auto it = t.find(name);
    if (it == t.end()) throw std::runtime_error("pvad weights: missing tensor '" + name + "'");
    if (it->second.dims.size() != rank) {
        throw std::runtime_error("pvad weights: tensor '" + name + "' has rank " +
                                 std::to_string(it->second.dims.size()) + ", expected " + std::to_string(rank));
    }
    return it->second;
}

}  // namespace

PvadModel PvadModel::zeros(const PvadDims& dims) { return shaped(dims); }

PvadModel PvadModel::random(const PvadDims& dims, std::uint64_t seed, double scale) {
    PvadModel m = shaped(dims);
    SeededRng rng(seed);
    for (auto& c : m.conv) {
        const double b = scale / std::sqrt(static_cast<double>(c.in_channels * c.kernel));
        fill_uniform(c.weight, rng, b);
        fill_uniform(c.bias, rng, b);
    }
    const double bg = scale / std::sqrt(static_cast<double>(m.gru.hidden));
    fill_uniform(m.gru.weight_ih, rng, bg);
    fill_uniform(m.gru.weight_hh, rng, bg);
    fill_uniform(m.gru.bias_ih, rng, bg);
    fill_uniform(m.gru.bias_hh, rng, bg);
    fill_uniform(m.classifier.weight, rng, bg);
    fill_uniform(m.classifier.bias, rng, bg);
    return m;
}

void PvadModel::validate() const {
    if (conv.empty()) throw std::invalid_argument("pvad model: no conv layers");
    for (std::size_t l = 0; l < conv.size(); ++l) {
        const auto& c = conv[l];
        const std::string tag = "conv." + std::to_string(l);
        if (c.kernel == 0) throw std::invalid_argument(tag + ": kernel must be >= 1");
        if (l > 0 && c.in_channels != conv[l - 1].out_channels) {
            throw std::invalid_argument(tag + ": in_channels " + std::to_string(c.in_channels) +
                                        " != previous out_channels " + std::to_string(conv[l - 1].out_channels));
        }
        expect_size(c.weight, c.out_channels * c.in_channels * c.kernel, tag + ".weight");
        expect_size(c.bias, c.out_channels, tag + ".bias");
    }
    if (gru.input != conv_out() + embedding_dim) {
        throw std::invalid_argument("gru: input " + std::to_string(gru.input) + " != conv channels " +
                                    std::to_string(conv_out()) + " + embedding " + std::to_string(embedding_dim));
    }
    expect_size(gru.weight_ih, 3 * gru.hidden * gru.input, "gru.weight_ih");
    expect_size(gru.weight_hh, 3 * gru.hidden * gru.hidden, "gru.weight_hh");
    expect_size(gru.bias_ih, 3 * gru.hidden, "gru.bias_ih");
    expect_size(gru.bias_hh, 3 * gru.hidden, "gru.bias_hh");
    if (classifier.in != gru.hidden || classifier.out != 1) {
        throw std::invalid_argument("classifier: expected " + std::to_string(gru.hidden) + " -> 1");
    }
    expect_size(classifier.weight, classifier.in, "classifier.weight");
    expect_size(classifier.bias, 1, "classifier.bias");
}

void save_pvad(std::ostream& out, const PvadModel& m) {
    m.validate();
    out.write("PVAD", 4);
    const std::uint16_t version = kWeightFormatVersion;
    out.write(reinterpret_cast<const char*>(&version), 2);
    auto u = [](std::size_t v) { return static_cast<std::uint32_t>(v); };
    for (std::size_t l = 0; l < m.conv.size(); ++l) {
        const auto& c = m.conv[l];
        const std::string p = "conv." + std::to_string(l);
        write_tensor(out, p + ".weight", {u(c.out_channels), u(c.in_channels), u(c.kernel)}, c.weight);
        write_tensor(out, p + ".bias", {u(c.out_channels)}, c.bias);
    }
    write_tensor(out, "gru.weight_ih", {u(3 * m.gru.hidden), u(m.gru.input)}, m.gru.weight_ih);
    write_tensor(out, "gru.weight_hh", {u(3 * m.gru.hidden), u(m.gru.hidden)}, m.gru.weight_hh);
    write_tensor(out, "gru.bias_ih", {u(3 * m.gru.hidden)}, m.gru.bias_ih);
    write_tensor(out, "gru.bias_hh", {u(3 * m.gru.hidden)}, m.gru.bias_hh);
    write_tensor(out, "classifier.weight", {1, u(m.classifier.in)}, m.classifier.weight);
    write_tensor(out, "classifier.bias", {1}, m.classifier.bias);
    if (!out) throw std::runtime_error("pvad weights: write failed");
}

PvadModel load_pvad(std::istream& in) {
    char magic[4];
    if (!read_exact(in, magic, 4) || std::memcmp(magic, "PVAD", 4) != 0) {
        throw std::runtime_error("pvad weights: bad magic (expected \"PVAD\")");
    }
    std::uint16_t version = 0;
    if (!read_exact(in, &version, 2)) throw std::runtime_error("pvad weights: truncated version");
    if (version != kWeightFormatVersion) {
        throw std::runtime_error("pvad weights: unsupported version " + std::to_string(version));
    }
    std::map<std::string, Tensor> tensors;
    while (in.peek() != std::char_traits<char>::eof()) {
        const auto name_len = read_u32(in, "name length");
        if (name_len > 4096) throw std::runtime_error("pvad weights: implausible name length");
        std::string name(name_len, '\0');
        if (!read_exact(in, name.data(), name_len)) throw std::runtime_error("pvad weights: truncated name");
        Tensor t;
        const auto rank = read_u32(in, "rank");
        if (rank > 8) throw std::runtime_error("pvad weights: implausible rank for '" + name + "'");
        std::size_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            t.dims.push_back(read_u32(in, "dims"));
            count *= t.dims.back();
        }
        if (count > (std::size_t{1} << 28)) throw std::runtime_error("pvad weights: tensor '" + name + "' too large");
        t.data.resize(count);
        if (!read_exact(in, t.data.data(), count * 4)) {
            throw std::runtime_error("pvad weights: truncated data for '" + name + "'");
        }
        tensors[name] = std::move(t);
    }

    PvadModel m;
    for (std::size_t l = 0;; ++l) {
        const std::string p = "conv." + std::to_string(l);
        if (!tensors.contains(p + ".weight")) break;
        const auto& w = need(tensors, p + ".weight", 3);
        CausalConv1d c;
        c.out_channels = w.dims[0];
        c.in_channels = w.dims[1];
        c.kernel = w.dims[2];
        c.weight = w.data;
        c.bias = need(tensors, p + ".bias", 1).data;
        m.conv.push_back(std::move(c));
    }
    if (m.conv.empty()) throw std::runtime_error("pvad weights: no conv layers");
    const auto& wih = need(tensors, "gru.weight_ih", 2);
    m.gru.hidden = wih.dims[0] / 3;
    m.gru.input = wih.dims[1];
    if (m.gru.input <= m.conv_out()) throw std::runtime_error("pvad weights: gru input leaves no room for the embedding");
    // The embedding is concatenated after the conv stack, so its width is implied.
    m.embedding_dim = m.gru.input - m.conv_out();
    m.gru.weight_ih = wih.data;
    m.gru.weight_hh = need(tensors, "gru.weight_hh", 2).data;
    m.gru.bias_ih = need(tensors, "gru.bias_ih", 1).data;
    m.gru.bias_hh = need(tensors, "gru.bias_hh", 1).data;
    const auto& cw = need(tensors, "classifier.weight", 2);
    m.classifier.out = cw.dims[0];
    m.classifier.in = cw.dims[1];
    m.classifier.weight = cw.data;
    m.classifier.bias = need(tensors, "classifier.bias", 1).data;
    try {
        m.validate();
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("pvad weights: ") + e.what());
    }
    return m;
}

void save_pvad(const std::filesystem::path& path, const PvadModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pvad weights: cannot write " + path.string());
    save_pvad(out, model);
}

PvadModel load_pvad(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("pvad weights: cannot open " + path.string());
    return load_pvad(in);
}

}  // namespace duplex::pvad
