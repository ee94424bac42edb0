#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace odam {

/// Dense row-major matrix of doubles.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Mat(std::size_t rows, std::size_t cols, std::vector<double> data);
    Mat(std::initializer_list<std::initializer_list<double>> rows);

    static Mat identity(std::size_t n);
    static Mat scalar(double v) { return Mat(1, 1, v); }
    static Mat column(std::span<const double> v);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const;
    Mat transposed() const;
    std::string shape_str() const;

    friend bool operator==(const Mat&, const Mat&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Mat matmul(const Mat& a, const Mat& b);
Mat select_rows(const Mat& m, std::span<const std::size_t> idx);
double squared_distance(std::span<const double> a, std::span<const double> b);

/// Thrown for shape mismatches, non-finite values and misuse of a Graph.
class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Handle to a node of a Graph.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
    friend bool operator==(Var, Var) = default;
};

enum class Op {
    Input,
    Param,
    Add,
    Sub,
    Mul,
    Affine,
    MatMul,
    AddRowBias,
    SubCol,
    Relu,
    Exp,
    Log,
    Sqrt,
    Square,
    XLogX,
    Sum,
    MeanRows,
    RowSum,
    RowLogSumExp,
    GatherRows,
    HConcat,
    NormalizeRows,
    KernelMix,
};

const char* op_name(Op op);

/// Scalar-valued expression DAG over dense matrices with reverse-mode
/// gradients. Nodes are appended in creation order, which is a topological
/// order, and are evaluated as they are created so shapes are known while
/// building. Leaf values may be rebound; forward() then re-evaluates every
/// node.
///
/// Not thread-safe; distinct graphs share no state.
class Graph {
public:
    Var input(Mat value, std::string name = {});
    Var param(Mat value, std::string name = {});

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);  // elementwise
    Var affine(Var a, double scale, double shift);
    Var scale(Var a, double s) { return affine(a, s, 0.0); }
    Var matmul(Var a, Var b);
    Var add_row_bias(Var a, Var bias);  // a: n x d, bias: 1 x d
    Var sub_col(Var a, Var col);        // a: n x k, col: n x 1
    Var relu(Var a);                    // derivative at 0 is 0
    Var exp(Var a);
    Var log(Var a);
    Var sqrt(Var a);   // derivative at 0 is 0
    Var square(Var a);
    Var xlogx(Var a);  // 0 log 0 = 0, derivative at 0 is 0
    Var sum(Var a);    // -> 1 x 1
    Var mean_rows(Var a);  // sum of all entries / row count -> 1 x 1
    Var row_sum(Var a);
    Var row_logsumexp(Var a);
    Var gather_rows(Var a, std::vector<std::size_t> rows);
    Var hconcat(std::vector<Var> parts);
    Var normalize_rows(Var a, double floor = 1e-12);
    /// Elementwise sum_m weights[m] * exp(-x / bandwidths[m]).
    Var kernel_mix(Var sqdist, std::vector<double> bandwidths, std::vector<double> weights);

    /// Tags subsequently created nodes; error messages carry the tag.
    void set_scope(std::string scope) { scope_ = std::move(scope); }

    void set_output(Var v);
    Var output() const { return output_; }

    void set_value(Var leaf, Mat value);
    const Mat& value(Var v) const;
    const Mat& grad(Var v) const;

    /// Evaluates every node; returns the 1 x 1 output.
    double forward();
    /// Accumulates d(output)/d(node) for every node. Requires a current forward pass.
    void backward();

    std::size_t node_count() const { return nodes_.size(); }
    std::vector<Var> params() const;
    const std::string& name(Var v) const;
    bool is_param(Var v) const;
    bool has_forward() const { return forward_valid_; }

private:
    struct Node {
        Op op;
        std::vector<int> in;
        double c0 = 0.0;
        double c1 = 0.0;
        std::vector<std::size_t> idx;
        std::vector<double> v0;
        std::vector<double> v1;
        std::string name;
        std::string scope;
        Mat value;
        Mat grad;
    };

    Var push(Node n);
    Node& node(Var v);
    const Node& node(Var v) const;
    std::string describe(int id) const;
    void eval_node(int id);
    void recompute();
    void backprop_node(int id);

    std::vector<Node> nodes_;
    std::string scope_;
    Var output_;
    bool values_valid_ = true;
    bool forward_valid_ = false;
    bool backward_valid_ = false;
};

using Bindings = std::vector<std::pair<Var, Mat>>;
using Gradients = std::vector<std::pair<Var, Mat>>;

/// Binds the given leaves and evaluates the graph output.
double eval_scalar(Graph& g, const Bindings& leaves = {});

/// Gradient of the output with respect to every parameter leaf.
Gradients backward(Graph& g);

struct LeafCheck {
    std::string name;
    double max_rel_error = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<LeafCheck> leaves;
    double max_rel_error = 0.0;
    bool pass = true;
};

/// Compares backward() against central differences over every entry of every
/// parameter leaf. Relative error is |a - n| / max(|a|, |n|, 1e-8).
/// Leaves the graph bound to its original values.
GradCheckReport grad_check(Graph& g, double step, double tolerance);

}  // namespace odam
