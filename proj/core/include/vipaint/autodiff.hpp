#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "vipaint/types.hpp"

// Minimal reverse-mode differentiation over vector-valued nodes.
//
// A Tape records every intermediate value of one scalar loss evaluation. Nodes are appended
// in evaluation order, so parents always precede children and the graph is acyclic by
// construction. Binary elementwise ops broadcast a size-1 operand against a vector.

namespace vipaint::ad {

class Tape;

class Var {
public:
    Var() = default;

    const Vec& value() const;
    double scalar() const;
    Eigen::Index size() const { return value().size(); }
    std::size_t id() const { return id_; }
    Tape* tape() const { return tape_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Adds the contribution of the node's output cotangent to its parents' cotangents.
using BackwardFn = std::function<void(const Vec& out_grad, std::vector<Vec*>& parent_grads)>;

class Gradients {
public:
    /// Gradient of the output with respect to `v` (zero if `v` did not influence it).
    const Vec& operator[](const Var& v) const;

private:
    friend class Tape;
    std::vector<Vec> grads_;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Differentiable input.
    Var leaf(Vec value);
    Var leaf(double value);
    Var constant(Vec value);
    Var constant(double value);

    /// Appends a node. Every parent must belong to this tape.
    Var record(Vec value, std::vector<Var> parents, BackwardFn backward);

    /// Reverse sweep from a size-1 output.
    Gradients backward(const Var& output) const;

    std::size_t size() const { return nodes_.size(); }
    const Vec& value(std::size_t id) const { return nodes_[id].value; }

private:
    struct Node {
        Vec value;
        std::vector<std::size_t> parents;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
/// Elementwise product.
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator*(const Var& a, double c);
Var operator*(double c, const Var& a);
Var operator+(const Var& a, double c);
Var operator+(double c, const Var& a);
Var operator-(const Var& a, double c);
Var operator-(double c, const Var& a);
/// Adds a constant vector.
Var operator+(const Var& a, const Vec& c);
Var operator-(const Var& a, const Vec& c);
Var operator-(const Vec& c, const Var& a);
/// Elementwise product with a constant vector.
Var operator*(const Var& a, const Vec& c);

Var exp(const Var& a);
Var log(const Var& a);
Var sigmoid(const Var& a);
Var square(const Var& a);
Var abs(const Var& a);
Var sum(const Var& a);
Var dot(const Var& a, const Var& b);

/// Opaque node y = f(x) whose backward rule is the supplied vector-Jacobian product.
Var opaque(const Var& x, Vec value, std::function<Vec(const Vec& cotangent)> vjp);

} // namespace vipaint::ad
