#pragma once

#include <functional>
#include <vector>

#include "ncp/matrix.hpp"

namespace ncp {

// Exact GELU x * Phi(x) and its derivative Phi(x) + x * phi(x).
double gelu_scalar(double x);
double gelu_deriv_scalar(double x);

// Reverse-mode differentiation tape over matrix primitives.
//
// Usage: one tape per training step. Create leaves for parameters, constants
// for data, compose ops (node handles are ints), call backward() on a scalar
// node, then read grad() of the leaves. Nodes are created in topological
// order, so the reverse walk in backward() is a valid reverse-topological
// traversal. SVD and inverse square roots are deliberately absent: they are
// post-processing/oracle operations, never part of the trained objective.
class Tape {
public:
    int leaf(Matrix v);      // parameter: participates in gradients
    int constant(Matrix v);  // data: no gradient tracked

    const Matrix& value(int id) const { return nodes_[id].value; }
    // Valid after backward(); zero matrix if the node was never reached.
    const Matrix& grad(int id);

    int matmul(int a, int b);
    int add(int a, int b);
    int sub(int a, int b);
    int hadamard(int a, int b);
    int scale(int a, double c);
    int transpose(int a);

    // Broadcast a 1 x cols vector across all rows of a.
    int add_rowvec(int a, int m);
    int sub_rowvec(int a, int m);
    int mul_rowvec(int a, int m);

    int mean_rows(int a);  // n x d -> 1 x d
    int row_sums(int a);   // n x d -> n x 1
    int slice_rows(int a, int begin, int count);

    int sum_all(int a);       // -> 1 x 1
    int mean_all(int a);      // -> 1 x 1
    int trace(int a);         // -> 1 x 1
    int frobenius_sq(int a);  // -> 1 x 1

    int gelu(int a);
    int exp(int a);
    int neg(int a);
    int square(int a);
    int sqrt(int a);

    double scalar(int id) const;  // value of a 1 x 1 node

    // Accumulates exact reverse-mode gradients into every node reachable from
    // output. Throws std::logic_error if output is not 1 x 1.
    void backward(int output);

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        std::function<void(Tape&, int)> back;  // reads own grad, accumulates into parents
    };

    int push(Matrix value, bool requires_grad, std::function<void(Tape&, int)> back);
    void accum(int id, const Matrix& delta);
    void accum_scaled(int id, const Matrix& delta, double c);
    bool needs_grad(int id) const { return nodes_[id].requires_grad; }

    std::vector<Node> nodes_;
};

}  // namespace ncp
