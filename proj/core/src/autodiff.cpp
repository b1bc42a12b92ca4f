#include "vipaint/autodiff.hpp"

#include <cmath>

namespace vipaint::ad {

namespace {

Tape& tape_of(const Var& a) {
    if (!a.valid()) throw DomainError("autodiff: use of an unbound variable");
    return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
    if (a.tape() != b.tape()) throw DomainError("autodiff: operands recorded on different tapes");
    return tape_of(a);
}

Eigen::Index broadcast_size(const Var& a, const Var& b) {
    const auto na = a.size();
    const auto nb = b.size();
    if (na == nb) return na;
    if (na == 1) return nb;
    if (nb == 1) return na;
    throw DomainError("autodiff: shape mismatch " + std::to_string(na) + " vs " + std::to_string(nb));
}

Vec expand(const Vec& v, Eigen::Index n) { return v.size() == n ? v : Vec::Constant(n, v[0]); }

// Accumulates g into target, summing over the broadcast dimension when target is scalar.
void accumulate(Vec* target, const Vec& g) {
    if (target->size() == g.size()) {
        *target += g;
    } else {
        (*target)[0] += g.sum();
    }
}

} // namespace

const Vec& Var::value() const { return tape_of(*this).value(id_); }

double Var::scalar() const {
    const Vec& v = value();
    if (v.size() != 1) throw DomainError("autodiff: scalar() on a non-scalar node");
    return v[0];
}

const Vec& Gradients::operator[](const Var& v) const { return grads_.at(v.id()); }

Var Tape::leaf(Vec value) { return record(std::move(value), {}, nullptr); }
Var Tape::leaf(double value) { return leaf(Vec::Constant(1, value)); }
Var Tape::constant(Vec value) { return record(std::move(value), {}, nullptr); }
Var Tape::constant(double value) { return constant(Vec::Constant(1, value)); }

Var Tape::record(Vec value, std::vector<Var> parents, BackwardFn backward) {
    Node node;
    node.value = std::move(value);
    node.backward = std::move(backward);
    const std::size_t id = nodes_.size();
    for (const Var& p : parents) {
        if (p.tape() != this) throw DomainError("autodiff: parent from another tape");
        if (p.id() >= id) throw DomainError("autodiff: parent does not precede child (cycle)");
        node.parents.push_back(p.id());
    }
    nodes_.push_back(std::move(node));
    return Var(this, id);
}

Gradients Tape::backward(const Var& output) const {
    if (output.tape() != this) throw DomainError("autodiff: output from another tape");
    if (nodes_[output.id()].value.size() != 1) throw DomainError("autodiff: backward needs a scalar output");
    Gradients g;
    g.grads_.reserve(nodes_.size());
    for (const Node& n : nodes_) g.grads_.push_back(Vec::Zero(n.value.size()));
    g.grads_[output.id()][0] = 1.0;
    std::vector<Vec*> parent_grads;
    for (std::size_t i = output.id() + 1; i-- > 0;) {
        const Node& n = nodes_[i];
        if (!n.backward || n.parents.empty()) continue;
        if (g.grads_[i].isZero(0.0)) continue;
        parent_grads.clear();
        for (std::size_t p : n.parents) parent_grads.push_back(&g.grads_[p]);
        n.backward(g.grads_[i], parent_grads);
    }
    return g;
}

Var operator+(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    const auto n = broadcast_size(a, b);
    return t.record(expand(a.value(), n) + expand(b.value(), n), {a, b},
                    [](const Vec& g, std::vector<Vec*>& pg) {
                        accumulate(pg[0], g);
                        accumulate(pg[1], g);
                    });
}

Var operator-(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    const auto n = broadcast_size(a, b);
    return t.record(expand(a.value(), n) - expand(b.value(), n), {a, b},
                    [](const Vec& g, std::vector<Vec*>& pg) {
                        accumulate(pg[0], g);
                        accumulate(pg[1], -g);
                    });
}

Var operator*(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    const auto n = broadcast_size(a, b);
    Vec av = expand(a.value(), n);
    Vec bv = expand(b.value(), n);
    Vec out = av.cwiseProduct(bv);
    return t.record(std::move(out), {a, b}, [av, bv](const Vec& g, std::vector<Vec*>& pg) {
        accumulate(pg[0], g.cwiseProduct(bv));
        accumulate(pg[1], g.cwiseProduct(av));
    });
}

Var operator/(const Var& a, const Var& b) {
    Tape& t = tape_of(a, b);
    const auto n = broadcast_size(a, b);
    Vec av = expand(a.value(), n);
    Vec bv = expand(b.value(), n);
    Vec out = av.cwiseQuotient(bv);
    return t.record(out, {a, b}, [out, bv](const Vec& g, std::vector<Vec*>& pg) {
        accumulate(pg[0], g.cwiseQuotient(bv));
        accumulate(pg[1], -g.cwiseProduct(out).cwiseQuotient(bv));
    });
}

Var operator-(const Var& a) { return a * -1.0; }

Var operator*(const Var& a, double c) {
    return tape_of(a).record(a.value() * c, {a}, [c](const Vec& g, std::vector<Vec*>& pg) { *pg[0] += c * g; });
}

Var operator*(double c, const Var& a) { return a * c; }

Var operator+(const Var& a, double c) {
    return tape_of(a).record(a.value().array() + c, {a}, [](const Vec& g, std::vector<Vec*>& pg) { *pg[0] += g; });
}

Var operator+(double c, const Var& a) { return a + c; }
Var operator-(const Var& a, double c) { return a + (-c); }
Var operator-(double c, const Var& a) { return (-a) + c; }

Var operator+(const Var& a, const Vec& c) {
    if (c.size() != a.size()) throw DomainError("autodiff: constant shape mismatch");
    return tape_of(a).record(a.value() + c, {a}, [](const Vec& g, std::vector<Vec*>& pg) { *pg[0] += g; });
}

Var operator-(const Var& a, const Vec& c) { return a + Vec(-c); }
Var operator-(const Vec& c, const Var& a) { return (-a) + c; }

Var operator*(const Var& a, const Vec& c) {
    const Eigen::Index n = a.size() == 1 ? c.size() : a.size();
    if (c.size() != n) throw DomainError("autodiff: constant shape mismatch");
    Vec av = expand(a.value(), n);
    return tape_of(a).record(av.cwiseProduct(c), {a},
                             [c](const Vec& g, std::vector<Vec*>& pg) { accumulate(pg[0], g.cwiseProduct(c)); });
}

Var exp(const Var& a) {
    Vec out = a.value().array().exp();
    return tape_of(a).record(out, {a},
                             [out](const Vec& g, std::vector<Vec*>& pg) { *pg[0] += g.cwiseProduct(out); });
}

Var log(const Var& a) {
    Vec av = a.value();
    return tape_of(a).record(av.array().log(), {a},
                             [av](const Vec& g, std::vector<Vec*>& pg) { *pg[0] += g.cwiseQuotient(av); });
}

Var sigmoid(const Var& a) {
    Vec out = a.value().unaryExpr([](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    });
    return tape_of(a).record(out, {a}, [out](const Vec& g, std::vector<Vec*>& pg) {
        *pg[0] += g.cwiseProduct(out.cwiseProduct((1.0 - out.array()).matrix()));
    });
}

Var square(const Var& a) {
    Vec av = a.value();
    return tape_of(a).record(av.cwiseAbs2(), {a},
                             [av](const Vec& g, std::vector<Vec*>& pg) { *pg[0] += 2.0 * g.cwiseProduct(av); });
}

// Subgradient sign(0) = 0.
Var abs(const Var& a) {
    Vec sign = a.value().unaryExpr([](double x) { return static_cast<double>((x > 0) - (x < 0)); });
    return tape_of(a).record(a.value().cwiseAbs(), {a},
                             [sign](const Vec& g, std::vector<Vec*>& pg) { *pg[0] += g.cwiseProduct(sign); });
}

Var sum(const Var& a) {
    return tape_of(a).record(Vec::Constant(1, a.value().sum()), {a},
                             [](const Vec& g, std::vector<Vec*>& pg) { pg[0]->array() += g[0]; });
}

Var dot(const Var& a, const Var& b) { return sum(a * b); }

Var opaque(const Var& x, Vec value, std::function<Vec(const Vec&)> vjp) {
    return tape_of(x).record(std::move(value), {x}, [vjp = std::move(vjp)](const Vec& g, std::vector<Vec*>& pg) {
        Vec back = vjp(g);
        if (back.size() != pg[0]->size()) throw DomainError("autodiff: opaque VJP returned wrong shape");
        *pg[0] += back;
    });
}

} // namespace vipaint::ad
