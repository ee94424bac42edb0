#include "odam/embednet.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "odam/textio.hpp"

namespace odam {

void NetConfig::validate() const {
    if (input_dim == 0) throw std::invalid_argument("NetConfig: input_dim must be >= 1");
    if (layer_dims.empty()) throw std::invalid_argument("NetConfig: at least one layer required");
    for (std::size_t d : layer_dims)
        if (d == 0) throw std::invalid_argument("NetConfig: layer widths must be >= 1");
    if (adapt_layer_count > layer_dims.size())
        throw std::invalid_argument("NetConfig: adapt_layer_count exceeds layer count");
}

NetParams init_params(const NetConfig& config, std::uint64_t seed) {
    config.validate();
    NetParams p;
    p.config = config;
    std::mt19937_64 rng(seed);
    std::size_t fan_in = config.input_dim;
    for (std::size_t fan_out : config.layer_dims) {
        const double half = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-half, half);
        Layer layer{Mat(fan_in, fan_out), Mat(1, fan_out)};
        for (double& w : layer.weight.data()) w = dist(rng);
        p.layers.push_back(std::move(layer));
        fan_in = fan_out;
    }
    return p;
}

LayerOutputs forward_layers(const NetParams& params, const Mat& batch) {
    if (batch.cols() != params.config.input_dim)
        throw std::invalid_argument("forward_layers: batch has " + std::to_string(batch.cols()) +
                                    " columns, network expects " + std::to_string(params.config.input_dim));
    LayerOutputs out;
    out.reserve(params.layers.size());
    const Mat* x = &batch;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const Layer& layer = params.layers[l];
        Mat a = matmul(*x, layer.weight);
        const bool last = l + 1 == params.layers.size();
        for (std::size_t r = 0; r < a.rows(); ++r)
            for (std::size_t c = 0; c < a.cols(); ++c) {
                double v = a(r, c) + layer.bias[c];
                if (!last && !(v > 0.0)) v = 0.0;
                a(r, c) = v;
            }
        out.push_back(std::move(a));
        x = &out.back();
    }
    return out;
}

NetVars bind_params(Graph& g, const NetParams& params) {
    NetVars vars;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        vars.weights.push_back(g.param(params.layers[l].weight, "W" + std::to_string(l + 1)));
        vars.biases.push_back(g.param(params.layers[l].bias, "b" + std::to_string(l + 1)));
    }
    return vars;
}

std::vector<Var> forward_layers(Graph& g, const NetVars& vars, Var batch) {
    std::vector<Var> out;
    Var x = batch;
    for (std::size_t l = 0; l < vars.weights.size(); ++l) {
        Var a = g.add_row_bias(g.matmul(x, vars.weights[l]), vars.biases[l]);
        if (l + 1 < vars.weights.size()) a = g.relu(a);
        out.push_back(a);
        x = a;
    }
    return out;
}

std::vector<Mat> param_grads(const Graph& g, const NetVars& vars) {
    std::vector<Mat> out;
    for (std::size_t l = 0; l < vars.weights.size(); ++l) {
        out.push_back(g.grad(vars.weights[l]));
        out.push_back(g.grad(vars.biases[l]));
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

void write_matrix(std::ostream& os, const char* tag, const Mat& m) {
    os << tag << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) os << (c ? " " : "") << format_real(m(r, c));
        os << '\n';
    }
}

class LineReader {
public:
    LineReader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

    std::vector<std::string_view> next() {
        if (!std::getline(is_, line_)) fail("unexpected end of file");
        ++lineno_;
        return split_ws(line_);
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw std::runtime_error(source_ + ":" + std::to_string(lineno_) + ": " + what);
    }

    std::size_t count(std::string_view s) const {
        auto v = parse_int(s);
        if (!v || *v < 0) fail("expected a count, got '" + std::string(s) + "'");
        return static_cast<std::size_t>(*v);
    }

    std::vector<std::string_view> keyed(std::string_view key, std::size_t min_fields) {
        auto f = next();
        if (f.empty() || f[0] != key || f.size() < min_fields) fail("expected '" + std::string(key) + "' line");
        return f;
    }

    Mat matrix(std::string_view tag, std::size_t rows, std::size_t cols) {
        auto h = keyed(tag, 3);
        if (count(h[1]) != rows || count(h[2]) != cols)
            fail(std::string(tag) + " shape does not match the header dims");
        Mat m(rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
            auto f = next();
            if (f.size() != cols) fail("expected " + std::to_string(cols) + " values");
            for (std::size_t c = 0; c < cols; ++c) {
                auto v = parse_real(f[c]);
                if (!v || !std::isfinite(*v)) fail("bad real '" + std::string(f[c]) + "'");
                m(r, c) = *v;
            }
        }
        return m;
    }

private:
    std::istream& is_;
    std::string source_;
    std::string line_;
    std::size_t lineno_ = 0;
};

}  // namespace

void write_checkpoint(const NetParams& params, const CheckpointMeta& meta, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
    const NetConfig& c = params.config;
    os << "odam-ckpt-v1\n";
    os << "input_dim " << c.input_dim << '\n';
    os << "layers " << c.layer_dims.size();
    for (std::size_t d : c.layer_dims) os << ' ' << d;
    os << '\n';
    os << "adapt " << c.adapt_layer_count << '\n';
    os << "seed " << meta.seed << '\n';
    os << "epoch " << meta.epoch << '\n';
    for (const Layer& layer : params.layers) {
        write_matrix(os, "weight", layer.weight);
        write_matrix(os, "bias", layer.bias);
    }
    if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

NetParams read_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
    LineReader in(is, path.string());
    auto magic = in.next();
    if (magic.size() != 1 || magic[0] != "odam-ckpt-v1") in.fail("not an odam-ckpt-v1 checkpoint");

    NetParams p;
    p.config.input_dim = in.count(in.keyed("input_dim", 2)[1]);
    auto lf = in.keyed("layers", 2);
    const std::size_t n = in.count(lf[1]);
    if (lf.size() != n + 2) in.fail("layer count does not match listed widths");
    p.config.layer_dims.clear();
    for (std::size_t i = 0; i < n; ++i) p.config.layer_dims.push_back(in.count(lf[i + 2]));
    p.config.adapt_layer_count = in.count(in.keyed("adapt", 2)[1]);
    CheckpointMeta m;
    m.seed = in.count(in.keyed("seed", 2)[1]);
    m.epoch = in.count(in.keyed("epoch", 2)[1]);
    try {
        p.config.validate();
    } catch (const std::exception& e) {
        in.fail(e.what());
    }

    std::size_t fan_in = p.config.input_dim;
    for (std::size_t fan_out : p.config.layer_dims) {
        Layer layer;
        layer.weight = in.matrix("weight", fan_in, fan_out);
        layer.bias = in.matrix("bias", 1, fan_out);
        p.layers.push_back(std::move(layer));
        fan_in = fan_out;
    }
    if (meta) *meta = m;
    return p;
}

}  // namespace odam
