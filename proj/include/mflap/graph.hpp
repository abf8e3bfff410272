#ifndef MFLAP_GRAPH_HPP
#define MFLAP_GRAPH_HPP

#include "mflap/tensor.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace mflap::ad {

// Static description of one pole-residue convolution layer. The kernel applies
// the transient + steady-state decomposition along the time axis; spatial axes
// (rank > 1 grids) are handled by truncated Fourier multiplication with an
// independent pole/residue set per retained spatial mode combination.
struct PrConvSpec {
    std::vector<int64_t> grid; // grid axis lengths, channels excluded
    std::vector<double> extents;
    int time_axis = 0;
    std::vector<int> spatial_cut; // per grid axis; entry at time_axis ignored
    int c_in = 1;
    int c_out = 1;
    int n_modes = 1;

    int64_t time_len() const { return grid[static_cast<size_t>(time_axis)]; }
    double time_extent() const { return extents[static_cast<size_t>(time_axis)]; }
    int spatial_combos() const;
};

enum class OpKind {
    Leaf,
    Constant,
    Affine,
    AffineChain,
    Sine,
    Relu,
    Exp,
    Add,
    Mul,
    Div,
    DftReal,
    ReduceSum,
    Concat,
    Broadcast,
    RealPart,
    AbsPow,
    PrConv,
};

struct PrConvWork; // defined in pr_conv.cpp

struct Node {
    OpKind kind;
    std::string name;
    std::vector<int> args;

    // op attributes (only the relevant ones are used per kind)
    double ca = 1.0, cb = 1.0; // Add coefficients / AbsPow exponent in ca
    int axis = 0;
    std::vector<int> axes;               // ReduceSum
    std::vector<int64_t> target_shape;   // Broadcast
    std::vector<std::pair<int, int>> chain_layers; // AffineChain: (w,b) node ids, b may be -1
    PrConvSpec pr;
    int work = -1; // index into Graph::prwork_

    // leaf metadata
    std::string leaf_id;
    bool requires_grad = false;
    bool frozen = false;

    Tensor value;
    Tensor grad;
    bool needs_grad = false; // propagated: gradient must flow through this node
};

// Reverse-mode computation graph over real/complex tensors. Nodes are stored
// in construction order, which is also the topological evaluation order. The
// graph owns all intermediate buffers and may be re-evaluated with fresh
// bindings; buffers are reused across calls.
//
// Gradients of a real-valued output with respect to complex leaves use the
// conjugate (Wirtinger) convention: the packed complex gradient holds
// dL/d(Re z) + i * dL/d(Im z), so a descent step on the packed value is
// exactly descent on the real and imaginary parts.
class Graph {
  public:
    using Bindings = std::map<std::string, const Tensor*>;

    Graph();
    ~Graph();
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) noexcept;
    Graph& operator=(Graph&&) noexcept;

    int leaf(const std::string& id, std::vector<int64_t> shape, DType dt,
             bool requires_grad, bool frozen = false);
    int constant(Tensor t, const std::string& name = "const");
    int affine(int x, int w, int b, const std::string& name = "affine"); // b = -1: none
    int affine_chain(int x, std::vector<std::pair<int, int>> layers,
                     const std::string& name = "chain");
    int sine(int x);
    int relu(int x);
    int exp_(int x); // elementwise exp, real or complex
    int add(int x, int y, double ax = 1.0, double ay = 1.0);
    int mul(int x, int y);
    int div(int x, int y);
    int dft_real(int x, int axis); // forward DFT with 1/M normalization
    int reduce_sum(int x, std::vector<int> axes);
    int concat(int x, int y, int axis);
    int broadcast(int x, std::vector<int64_t> target);
    int real_part(int x);
    int abspow(int x, double p);
    int pr_conv(int v, int mu, int beta, const PrConvSpec& spec,
                const std::string& name = "laplace");

    void set_output(int id);
    int output() const { return output_; }

    const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
    int num_nodes() const { return static_cast<int>(nodes_.size()); }

    // Evaluates the graph; all leaves must be bound and shapes must match the
    // declared leaf shapes. Intermediates are cached for backward().
    const Tensor& forward(const Bindings& bindings);

    // Reverse pass. Requires a prior forward() with the same bindings.
    // Returns gradients for every requires_grad leaf; frozen leaves map to
    // zero tensors.
    std::map<std::string, Tensor> backward(const Tensor& cotangent);

    // Max relative error between analytic gradients and central differences,
    // taken over all non-frozen trainable leaf components. Output must be a
    // real scalar.
    double grad_check(const Bindings& bindings, double eps);

    const std::vector<std::string>& leaf_ids() const { return leaf_order_; }

  private:
    friend struct PrConvWork;
    friend void pr_conv_forward(Graph&, Node&);
    friend void pr_conv_backward(Graph&, Node&);

    int push(Node n);
    void check_rank(int x, const char* who) const;
    void eval_node(int id);
    void backprop_node(int id);
    Tensor& grad_buf(int id);

    std::vector<Node> nodes_;
    std::vector<std::unique_ptr<PrConvWork>> prwork_;
    std::map<std::string, int> leaf_lookup_;
    std::vector<std::string> leaf_order_;
    int output_ = -1;
    bool forward_done_ = false;
};

// helpers shared by ops
void pr_conv_forward(Graph& g, Node& n);
void pr_conv_backward(Graph& g, Node& n);

} // namespace mflap::ad

#endif
