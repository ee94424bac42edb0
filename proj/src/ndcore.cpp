#include "odam/ndcore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace odam {

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw GraphError("Mat: data length " + std::to_string(data_.size()) +
                         " does not match shape " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
}

Mat::Mat(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw GraphError("Mat: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Mat Mat::identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat Mat::column(std::span<const double> v) {
    return Mat(v.size(), 1, std::vector<double>(v.begin(), v.end()));
}

bool Mat::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Mat Mat::transposed() const {
    Mat t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

std::string Mat::shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows())
        throw GraphError("matmul: " + a.shape_str() + " * " + b.shape_str());
    Mat out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto orow = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

Mat select_rows(const Mat& m, std::span<const std::size_t> idx) {
    Mat out(idx.size(), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= m.rows())
            throw GraphError("select_rows: index " + std::to_string(idx[i]) + " out of range " +
                             std::to_string(m.rows()));
        std::copy_n(m.row(idx[i]).begin(), m.cols(), out.row(i).begin());
    }
    return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

const char* op_name(Op op) {
    switch (op) {
        case Op::Input: return "input";
        case Op::Param: return "param";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Affine: return "affine";
        case Op::MatMul: return "matmul";
        case Op::AddRowBias: return "add_row_bias";
        case Op::SubCol: return "sub_col";
        case Op::Relu: return "relu";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Sqrt: return "sqrt";
        case Op::Square: return "square";
        case Op::XLogX: return "xlogx";
        case Op::Sum: return "sum";
        case Op::MeanRows: return "mean_rows";
        case Op::RowSum: return "row_sum";
        case Op::RowLogSumExp: return "row_logsumexp";
        case Op::GatherRows: return "gather_rows";
        case Op::HConcat: return "hconcat";
        case Op::NormalizeRows: return "normalize_rows";
        case Op::KernelMix: return "kernel_mix";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// construction

Var Graph::push(Node n) {
    for (int i : n.in)
        if (i < 0 || i >= static_cast<int>(nodes_.size()))
            throw GraphError(std::string("graph: invalid input handle for ") + op_name(n.op));
    n.scope = scope_;
    nodes_.push_back(std::move(n));
    forward_valid_ = false;
    backward_valid_ = false;
    const int id = static_cast<int>(nodes_.size()) - 1;
    if (values_valid_) {
        values_valid_ = false;
        eval_node(id);
        values_valid_ = true;
    } else {
        recompute();
    }
    return Var{id};
}

void Graph::recompute() {
    values_valid_ = false;
    for (std::size_t i = 0; i < nodes_.size(); ++i) eval_node(static_cast<int>(i));
    values_valid_ = true;
}

Graph::Node& Graph::node(Var v) {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) throw GraphError("graph: invalid handle");
    return nodes_[v.id];
}

const Graph::Node& Graph::node(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) throw GraphError("graph: invalid handle");
    return nodes_[v.id];
}

std::string Graph::describe(int id) const {
    const Node& n = nodes_[id];
    std::ostringstream os;
    os << "node " << id << " (" << op_name(n.op);
    if (!n.name.empty()) os << " '" << n.name << "'";
    if (!n.scope.empty()) os << " in " << n.scope;
    os << ")";
    return os.str();
}

Var Graph::input(Mat value, std::string name) {
    Node n{Op::Input, {}};
    n.value = std::move(value);
    n.name = std::move(name);
    return push(std::move(n));
}

Var Graph::param(Mat value, std::string name) {
    Node n{Op::Param, {}};
    n.value = std::move(value);
    n.name = std::move(name);
    return push(std::move(n));
}

Var Graph::add(Var a, Var b) { return push({Op::Add, {a.id, b.id}}); }
Var Graph::sub(Var a, Var b) { return push({Op::Sub, {a.id, b.id}}); }
Var Graph::mul(Var a, Var b) { return push({Op::Mul, {a.id, b.id}}); }

Var Graph::affine(Var a, double scale, double shift) {
    Node n{Op::Affine, {a.id}};
    n.c0 = scale;
    n.c1 = shift;
    return push(std::move(n));
}

Var Graph::matmul(Var a, Var b) { return push({Op::MatMul, {a.id, b.id}}); }
Var Graph::add_row_bias(Var a, Var bias) { return push({Op::AddRowBias, {a.id, bias.id}}); }
Var Graph::sub_col(Var a, Var col) { return push({Op::SubCol, {a.id, col.id}}); }
Var Graph::relu(Var a) { return push({Op::Relu, {a.id}}); }
Var Graph::exp(Var a) { return push({Op::Exp, {a.id}}); }
Var Graph::log(Var a) { return push({Op::Log, {a.id}}); }
Var Graph::sqrt(Var a) { return push({Op::Sqrt, {a.id}}); }
Var Graph::square(Var a) { return push({Op::Square, {a.id}}); }
Var Graph::xlogx(Var a) { return push({Op::XLogX, {a.id}}); }
Var Graph::sum(Var a) { return push({Op::Sum, {a.id}}); }
Var Graph::mean_rows(Var a) { return push({Op::MeanRows, {a.id}}); }
Var Graph::row_sum(Var a) { return push({Op::RowSum, {a.id}}); }
Var Graph::row_logsumexp(Var a) { return push({Op::RowLogSumExp, {a.id}}); }

Var Graph::gather_rows(Var a, std::vector<std::size_t> rows) {
    Node n{Op::GatherRows, {a.id}};
    n.idx = std::move(rows);
    return push(std::move(n));
}

Var Graph::hconcat(std::vector<Var> parts) {
    if (parts.empty()) throw GraphError("hconcat: no inputs");
    Node n{Op::HConcat, {}};
    for (Var p : parts) n.in.push_back(p.id);
    return push(std::move(n));
}

Var Graph::normalize_rows(Var a, double floor) {
    Node n{Op::NormalizeRows, {a.id}};
    n.c0 = floor;
    return push(std::move(n));
}

Var Graph::kernel_mix(Var sqdist, std::vector<double> bandwidths, std::vector<double> weights) {
    if (bandwidths.empty() || bandwidths.size() != weights.size())
        throw GraphError("kernel_mix: bandwidth/weight lists must be nonempty and equal length");
    for (double s : bandwidths)
        if (!(s > 0.0)) throw GraphError("kernel_mix: bandwidth must be positive");
    Node n{Op::KernelMix, {sqdist.id}};
    n.v0 = std::move(bandwidths);
    n.v1 = std::move(weights);
    return push(std::move(n));
}

void Graph::set_output(Var v) {
    node(v);
    output_ = v;
    forward_valid_ = false;
    backward_valid_ = false;
}

void Graph::set_value(Var leaf, Mat value) {
    Node& n = node(leaf);
    if (n.op != Op::Input && n.op != Op::Param)
        throw GraphError("set_value: " + describe(leaf.id) + " is not a leaf");
    n.value = std::move(value);
    values_valid_ = false;
    forward_valid_ = false;
    backward_valid_ = false;
}

const Mat& Graph::value(Var v) const {
    const Node& n = node(v);
    if (!values_valid_ && n.op != Op::Input && n.op != Op::Param)
        throw GraphError("value: graph not evaluated since leaves were rebound");
    return n.value;
}

const Mat& Graph::grad(Var v) const {
    if (!backward_valid_) throw GraphError("grad: backward has not run");
    return node(v).grad;
}

std::vector<Var> Graph::params() const {
    std::vector<Var> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].op == Op::Param) out.push_back(Var{static_cast<int>(i)});
    return out;
}

const std::string& Graph::name(Var v) const { return node(v).name; }
bool Graph::is_param(Var v) const { return node(v).op == Op::Param; }

// ---------------------------------------------------------------------------
// forward

namespace {

template <class F>
Mat map_unary(const Mat& a, F f) {
    Mat out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
    return out;
}

}  // namespace

void Graph::eval_node(int id) {
    Node& n = nodes_[id];
    auto in = [&](std::size_t k) -> const Mat& { return nodes_[n.in[k]].value; };
    auto shape_error = [&](const std::string& what) {
        throw GraphError("shape mismatch at " + describe(id) + ": " + what);
    };
    auto same = [&](const Mat& a, const Mat& b) {
        if (!a.same_shape(b)) shape_error(a.shape_str() + " vs " + b.shape_str());
    };

    switch (n.op) {
        case Op::Input:
        case Op::Param:
            if (n.value.size() != n.value.rows() * n.value.cols()) shape_error("corrupt leaf");
            break;
        case Op::Add:
        case Op::Sub:
        case Op::Mul: {
            const Mat& a = in(0);
            const Mat& b = in(1);
            same(a, b);
            Mat out(a.rows(), a.cols());
            for (std::size_t i = 0; i < a.size(); ++i)
                out[i] = n.op == Op::Add ? a[i] + b[i] : n.op == Op::Sub ? a[i] - b[i] : a[i] * b[i];
            n.value = std::move(out);
            break;
        }
        case Op::Affine:
            n.value = map_unary(in(0), [&](double x) { return n.c0 * x + n.c1; });
            break;
        case Op::MatMul:
            if (in(0).cols() != in(1).rows()) shape_error(in(0).shape_str() + " * " + in(1).shape_str());
            n.value = odam::matmul(in(0), in(1));
            break;
        case Op::AddRowBias: {
            const Mat& a = in(0);
            const Mat& b = in(1);
            if (b.rows() != 1 || b.cols() != a.cols()) shape_error(a.shape_str() + " + bias " + b.shape_str());
            Mat out = a;
            for (std::size_t r = 0; r < a.rows(); ++r)
                for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) += b[c];
            n.value = std::move(out);
            break;
        }
        case Op::SubCol: {
            const Mat& a = in(0);
            const Mat& b = in(1);
            if (b.cols() != 1 || b.rows() != a.rows()) shape_error(a.shape_str() + " - col " + b.shape_str());
            Mat out = a;
            for (std::size_t r = 0; r < a.rows(); ++r)
                for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) -= b[r];
            n.value = std::move(out);
            break;
        }
        case Op::Relu:
            n.value = map_unary(in(0), [](double x) { return x > 0.0 ? x : 0.0; });
            break;
        case Op::Exp:
            n.value = map_unary(in(0), [](double x) { return std::exp(x); });
            break;
        case Op::Log:
            n.value = map_unary(in(0), [](double x) { return std::log(x); });
            break;
        case Op::Sqrt:
            n.value = map_unary(in(0), [](double x) { return std::sqrt(x); });
            break;
        case Op::Square:
            n.value = map_unary(in(0), [](double x) { return x * x; });
            break;
        case Op::XLogX:
            n.value = map_unary(in(0), [](double x) { return x == 0.0 ? 0.0 : x * std::log(x); });
            break;
        case Op::Sum: {
            double s = 0.0;
            for (double x : in(0).data()) s += x;
            n.value = Mat::scalar(s);
            break;
        }
        case Op::MeanRows: {
            if (in(0).rows() == 0) shape_error("mean over zero rows");
            double s = 0.0;
            for (double x : in(0).data()) s += x;
            n.value = Mat::scalar(s / static_cast<double>(in(0).rows()));
            break;
        }
        case Op::RowSum: {
            const Mat& a = in(0);
            Mat out(a.rows(), 1);
            for (std::size_t r = 0; r < a.rows(); ++r) {
                double s = 0.0;
                for (double x : a.row(r)) s += x;
                out[r] = s;
            }
            n.value = std::move(out);
            break;
        }
        case Op::RowLogSumExp: {
            const Mat& a = in(0);
            if (a.cols() == 0) shape_error("row_logsumexp over zero columns");
            Mat out(a.rows(), 1);
            for (std::size_t r = 0; r < a.rows(); ++r) {
                auto row = a.row(r);
                const double mx = *std::max_element(row.begin(), row.end());
                double s = 0.0;
                for (double x : row) s += std::exp(x - mx);
                out[r] = mx + std::log(s);
            }
            n.value = std::move(out);
            break;
        }
        case Op::GatherRows: {
            const Mat& a = in(0);
            for (std::size_t i : n.idx)
                if (i >= a.rows()) shape_error("row index " + std::to_string(i) + " of " + a.shape_str());
            n.value = select_rows(a, n.idx);
            break;
        }
        case Op::HConcat: {
            std::size_t rows = in(0).rows();
            std::size_t cols = 0;
            for (std::size_t k = 0; k < n.in.size(); ++k) {
                if (in(k).rows() != rows) shape_error("row counts differ across parts");
                cols += in(k).cols();
            }
            Mat out(rows, cols);
            std::size_t off = 0;
            for (std::size_t k = 0; k < n.in.size(); ++k) {
                const Mat& p = in(k);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < p.cols(); ++c) out(r, off + c) = p(r, c);
                off += p.cols();
            }
            n.value = std::move(out);
            break;
        }
        case Op::NormalizeRows: {
            const Mat& a = in(0);
            Mat out(a.rows(), a.cols());
            for (std::size_t r = 0; r < a.rows(); ++r) {
                double s = 0.0;
                for (double x : a.row(r)) s += x * x;
                const double norm = std::max(std::sqrt(s), n.c0);
                for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c) / norm;
            }
            n.value = std::move(out);
            break;
        }
        case Op::KernelMix: {
            const Mat& a = in(0);
            Mat out(a.rows(), a.cols());
            for (std::size_t i = 0; i < a.size(); ++i) {
                double s = 0.0;
                for (std::size_t m = 0; m < n.v0.size(); ++m) s += n.v1[m] * std::exp(-a[i] / n.v0[m]);
                out[i] = s;
            }
            n.value = std::move(out);
            break;
        }
    }
    if (!n.value.all_finite()) throw GraphError("non-finite value at " + describe(id));
}

double Graph::forward() {
    if (!output_.valid()) throw GraphError("forward: no output set");
    forward_valid_ = false;
    backward_valid_ = false;
    if (!values_valid_) recompute();
    const Mat& out = nodes_[output_.id].value;
    if (out.rows() != 1 || out.cols() != 1)
        throw GraphError("forward: output " + describe(output_.id) + " is " + out.shape_str() +
                         ", expected 1x1");
    forward_valid_ = true;
    return out[0];
}

// ---------------------------------------------------------------------------
// backward

void Graph::backprop_node(int id) {
    Node& n = nodes_[id];
    const Mat& g = n.grad;
    auto in_val = [&](std::size_t k) -> const Mat& { return nodes_[n.in[k]].value; };
    auto in_grad = [&](std::size_t k) -> Mat& { return nodes_[n.in[k]].grad; };

    switch (n.op) {
        case Op::Input:
        case Op::Param:
            break;
        case Op::Add:
            for (std::size_t i = 0; i < g.size(); ++i) {
                in_grad(0)[i] += g[i];
                in_grad(1)[i] += g[i];
            }
            break;
        case Op::Sub:
            for (std::size_t i = 0; i < g.size(); ++i) {
                in_grad(0)[i] += g[i];
                in_grad(1)[i] -= g[i];
            }
            break;
        case Op::Mul: {
            const Mat& a = in_val(0);
            const Mat& b = in_val(1);
            for (std::size_t i = 0; i < g.size(); ++i) {
                in_grad(0)[i] += g[i] * b[i];
                in_grad(1)[i] += g[i] * a[i];
            }
            break;
        }
        case Op::Affine:
            for (std::size_t i = 0; i < g.size(); ++i) in_grad(0)[i] += g[i] * n.c0;
            break;
        case Op::MatMul: {
            const Mat& a = in_val(0);
            const Mat& b = in_val(1);
            Mat& ga = in_grad(0);
            Mat& gb = in_grad(1);
            // dA = G B^T, dB = A^T G
            for (std::size_t i = 0; i < a.rows(); ++i)
                for (std::size_t k = 0; k < a.cols(); ++k) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < b.cols(); ++j) s += g(i, j) * b(k, j);
                    ga(i, k) += s;
                }
            for (std::size_t i = 0; i < a.rows(); ++i)
                for (std::size_t k = 0; k < a.cols(); ++k) {
                    const double aik = a(i, k);
                    if (aik == 0.0) continue;
                    for (std::size_t j = 0; j < b.cols(); ++j) gb(k, j) += aik * g(i, j);
                }
            break;
        }
        case Op::AddRowBias: {
            Mat& gb = in_grad(1);
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) {
                    in_grad(0)(r, c) += g(r, c);
                    gb[c] += g(r, c);
                }
            break;
        }
        case Op::SubCol: {
            Mat& gc = in_grad(1);
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) {
                    in_grad(0)(r, c) += g(r, c);
                    gc[r] -= g(r, c);
                }
            break;
        }
        case Op::Relu: {
            const Mat& a = in_val(0);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (a[i] > 0.0) in_grad(0)[i] += g[i];
            break;
        }
        case Op::Exp:
            for (std::size_t i = 0; i < g.size(); ++i) in_grad(0)[i] += g[i] * n.value[i];
            break;
        case Op::Log: {
            const Mat& a = in_val(0);
            for (std::size_t i = 0; i < g.size(); ++i) in_grad(0)[i] += g[i] / a[i];
            break;
        }
        case Op::Sqrt:
            for (std::size_t i = 0; i < g.size(); ++i)
                if (n.value[i] > 0.0) in_grad(0)[i] += g[i] * 0.5 / n.value[i];
            break;
        case Op::Square: {
            const Mat& a = in_val(0);
            for (std::size_t i = 0; i < g.size(); ++i) in_grad(0)[i] += g[i] * 2.0 * a[i];
            break;
        }
        case Op::XLogX: {
            const Mat& a = in_val(0);
            for (std::size_t i = 0; i < g.size(); ++i)
                if (a[i] > 0.0) in_grad(0)[i] += g[i] * (std::log(a[i]) + 1.0);
            break;
        }
        case Op::Sum: {
            Mat& ga = in_grad(0);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
            break;
        }
        case Op::MeanRows: {
            Mat& ga = in_grad(0);
            const double d = g[0] / static_cast<double>(ga.rows());
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += d;
            break;
        }
        case Op::RowSum: {
            Mat& ga = in_grad(0);
            for (std::size_t r = 0; r < ga.rows(); ++r)
                for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g[r];
            break;
        }
        case Op::RowLogSumExp: {
            const Mat& a = in_val(0);
            Mat& ga = in_grad(0);
            for (std::size_t r = 0; r < a.rows(); ++r)
                for (std::size_t c = 0; c < a.cols(); ++c)
                    ga(r, c) += g[r] * std::exp(a(r, c) - n.value[r]);
            break;
        }
        case Op::GatherRows: {
            Mat& ga = in_grad(0);
            for (std::size_t i = 0; i < n.idx.size(); ++i) {
                auto src = g.row(i);
                auto dst = ga.row(n.idx[i]);
                for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
            }
            break;
        }
        case Op::HConcat: {
            std::size_t off = 0;
            for (std::size_t k = 0; k < n.in.size(); ++k) {
                Mat& gp = in_grad(k);
                for (std::size_t r = 0; r < gp.rows(); ++r)
                    for (std::size_t c = 0; c < gp.cols(); ++c) gp(r, c) += g(r, off + c);
                off += gp.cols();
            }
            break;
        }
        case Op::NormalizeRows: {
            const Mat& a = in_val(0);
            Mat& ga = in_grad(0);
            for (std::size_t r = 0; r < a.rows(); ++r) {
                double s = 0.0;
                for (double x : a.row(r)) s += x * x;
                const double norm = std::sqrt(s);
                if (norm <= n.c0) {
                    for (std::size_t c = 0; c < a.cols(); ++c) ga(r, c) += g(r, c) / n.c0;
                    continue;
                }
                // d(x/|x|) = (I - y y^T) / |x|
                double gy = 0.0;
                for (std::size_t c = 0; c < a.cols(); ++c) gy += g(r, c) * n.value(r, c);
                for (std::size_t c = 0; c < a.cols(); ++c)
                    ga(r, c) += (g(r, c) - gy * n.value(r, c)) / norm;
            }
            break;
        }
        case Op::KernelMix: {
            const Mat& a = in_val(0);
            for (std::size_t i = 0; i < a.size(); ++i) {
                double d = 0.0;
                for (std::size_t m = 0; m < n.v0.size(); ++m)
                    d -= n.v1[m] / n.v0[m] * std::exp(-a[i] / n.v0[m]);
                in_grad(0)[i] += g[i] * d;
            }
            break;
        }
    }
}

void Graph::backward() {
    if (!forward_valid_) throw GraphError("backward: called before forward evaluation");
    for (Node& n : nodes_) n.grad = Mat(n.value.rows(), n.value.cols());
    nodes_[output_.id].grad[0] = 1.0;
    for (int id = output_.id; id >= 0; --id) backprop_node(id);
    backward_valid_ = true;
}

// ---------------------------------------------------------------------------

double eval_scalar(Graph& g, const Bindings& leaves) {
    for (const auto& [leaf, value] : leaves) g.set_value(leaf, value);
    return g.forward();
}

Gradients backward(Graph& g) {
    g.backward();
    Gradients out;
    for (Var p : g.params()) out.emplace_back(p, g.grad(p));
    return out;
}

GradCheckReport grad_check(Graph& g, double step, double tolerance) {
    if (!(step > 0.0)) throw GraphError("grad_check: step must be positive");
    GradCheckReport report;
    g.forward();
    const Gradients analytic = backward(g);
    for (const auto& [leaf, grad] : analytic) {
        LeafCheck check;
        check.name = g.name(leaf).empty() ? "leaf " + std::to_string(leaf.id) : g.name(leaf);
        const Mat original = g.value(leaf);
        Mat probe = original;
        for (std::size_t i = 0; i < original.size(); ++i) {
            probe[i] = original[i] + step;
            g.set_value(leaf, probe);
            const double up = g.forward();
            probe[i] = original[i] - step;
            g.set_value(leaf, probe);
            const double down = g.forward();
            probe[i] = original[i];
            const double numeric = (up - down) / (2.0 * step);
            const double denom = std::max({std::abs(grad[i]), std::abs(numeric), 1e-8});
            check.max_rel_error = std::max(check.max_rel_error, std::abs(grad[i] - numeric) / denom);
        }
        g.set_value(leaf, original);
        check.pass = check.max_rel_error < tolerance;
        report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
        report.pass = report.pass && check.pass;
        report.leaves.push_back(std::move(check));
    }
    g.forward();
    g.backward();
    return report;
}

}  // namespace odam
