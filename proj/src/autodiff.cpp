#include "emf/autodiff.hpp"

#include <unordered_set>

namespace emf::ad {

namespace {

Value make_node(Tensor value, std::vector<Value> parents, BackFn back) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->back = std::move(back);
    return n;
}

} // namespace

Value constant(Tensor v) { return make_node(std::move(v), {}, {}); }

Value stop_gradient(const Value& v) {
    auto n = make_node(v->value, {v}, {});
    n->stop_grad = true;
    return n;
}

Value add(const Value& a, const Value& b) {
    return make_node(t_add(a->value, b->value), {a, b},
                     [](const Node&, const Tensor& g, std::vector<Tensor>& pg) {
                         axpy(1.0, g, pg[0]);
                         axpy(1.0, g, pg[1]);
                     });
}

Value sub(const Value& a, const Value& b) {
    return make_node(t_sub(a->value, b->value), {a, b},
                     [](const Node&, const Tensor& g, std::vector<Tensor>& pg) {
                         axpy(1.0, g, pg[0]);
                         axpy(-1.0, g, pg[1]);
                     });
}

Value mul(const Value& a, const Value& b) {
    return make_node(t_mul(a->value, b->value), {a, b},
                     [](const Node& self, const Tensor& g, std::vector<Tensor>& pg) {
                         const Tensor& av = self.parents[0]->value;
                         const Tensor& bv = self.parents[1]->value;
                         for (std::size_t i = 0; i < g.numel(); ++i) {
                             pg[0][i] += g[i] * bv[i];
                             pg[1][i] += g[i] * av[i];
                         }
                     });
}

Value smul(const Value& a, double s) {
    return make_node(t_smul(a->value, s), {a},
                     [s](const Node&, const Tensor& g, std::vector<Tensor>& pg) { axpy(s, g, pg[0]); });
}

Value matmul(const Value& a, const Value& b) {
    return make_node(t_matmul(a->value, b->value), {a, b},
                     [](const Node& self, const Tensor& g, std::vector<Tensor>& pg) {
                         const Tensor& av = self.parents[0]->value;
                         const Tensor& bv = self.parents[1]->value;
                         axpy(1.0, gemm(g, bv, false, true), pg[0]);
                         axpy(1.0, gemm(av, g, true, false), pg[1]);
                     });
}

Value linear(const Value& x, const Value& w, const Value& b) {
    return make_node(t_linear(x->value, w->value, b->value), {x, w, b},
                     [](const Node& self, const Tensor& g, std::vector<Tensor>& pg) {
                         const Tensor& xv = self.parents[0]->value;
                         const Tensor& wv = self.parents[1]->value;
                         axpy(1.0, gemm(g, wv, false, false), pg[0]);
                         axpy(1.0, gemm(g, xv, true, false), pg[1]);
                         axpy(1.0, t_colsum(g), pg[2]);
                     });
}

Value tanh_op(const Value& a) {
    return make_node(t_tanh(a->value), {a},
                     [](const Node& self, const Tensor& g, std::vector<Tensor>& pg) {
                         const Tensor& y = self.value;
                         for (std::size_t i = 0; i < g.numel(); ++i) pg[0][i] += g[i] * (1.0 - y[i] * y[i]);
                     });
}

Value silu_op(const Value& a) {
    return make_node(t_silu(a->value), {a},
                     [](const Node& self, const Tensor& g, std::vector<Tensor>& pg) {
                         const Tensor d = t_silu_prime(self.parents[0]->value);
                         for (std::size_t i = 0; i < g.numel(); ++i) pg[0][i] += g[i] * d[i];
                     });
}

Value sum_all(const Value& a) {
    return make_node(t_sum(a->value), {a},
                     [](const Node&, const Tensor& g, std::vector<Tensor>& pg) {
                         const double gv = g[0];
                         for (std::size_t i = 0; i < pg[0].numel(); ++i) pg[0][i] += gv;
                     });
}

Value mean_all(const Value& a) {
    return make_node(t_mean(a->value), {a},
                     [](const Node&, const Tensor& g, std::vector<Tensor>& pg) {
                         const double gv = g[0] / static_cast<double>(pg[0].numel());
                         for (std::size_t i = 0; i < pg[0].numel(); ++i) pg[0][i] += gv;
                     });
}

Value row_sqnorm(const Value& a) {
    return make_node(t_row_sqnorm(a->value), {a},
                     [](const Node& self, const Tensor& g, std::vector<Tensor>& pg) {
                         const Tensor& x = self.parents[0]->value;
                         const std::size_t bn = x.rows(), d = x.cols();
                         for (std::size_t i = 0; i < bn; ++i)
                             for (std::size_t j = 0; j < d; ++j) pg[0][i * d + j] += 2.0 * x[i * d + j] * g[i];
                     });
}

Value sqnorm_all(const Value& a) {
    return make_node(t_sqnorm(a->value), {a},
                     [](const Node& self, const Tensor& g, std::vector<Tensor>& pg) {
                         const Tensor& x = self.parents[0]->value;
                         for (std::size_t i = 0; i < x.numel(); ++i) pg[0][i] += 2.0 * x[i] * g[0];
                     });
}

Value concat_cols(const std::vector<Value>& parts) {
    std::vector<Tensor> vals;
    vals.reserve(parts.size());
    for (const Value& p : parts) vals.push_back(p->value);
    return make_node(t_concat_cols(vals), std::vector<Value>(parts),
                     [](const Node& self, const Tensor& g, std::vector<Tensor>& pg) {
                         const std::size_t bn = g.rows();
                         std::size_t off = 0;
                         for (std::size_t k = 0; k < pg.size(); ++k) {
                             const std::size_t d = self.parents[k]->value.cols();
                             for (std::size_t i = 0; i < bn; ++i)
                                 for (std::size_t j = 0; j < d; ++j)
                                     pg[k][i * d + j] += g[i * g.cols() + off + j];
                             off += d;
                         }
                     });
}

Value gather_rows(const Value& table, std::vector<int> idx) {
    return make_node(t_gather_rows(table->value, idx), {table},
                     [idx](const Node&, const Tensor& g, std::vector<Tensor>& pg) {
                         const std::size_t h = g.cols();
                         for (std::size_t i = 0; i < idx.size(); ++i) {
                             double* dst = pg[0].data() + static_cast<std::size_t>(idx[i]) * h;
                             const double* src = g.data() + i * h;
                             for (std::size_t j = 0; j < h; ++j) dst[j] += src[j];
                         }
                     });
}

GradMap backward(const Value& root) {
    contract(root != nullptr, "backward: null root");
    contract(root->value.numel() == 1, "backward: root must be scalar, got shape " + root->value.shape_str());

    // postorder DFS; stop_grad nodes act as leaves (their parents are never walked)
    std::vector<const Node*> order;
    std::unordered_set<const Node*> seen;
    std::vector<std::pair<const Node*, std::size_t>> stack;
    stack.push_back({root.get(), 0});
    seen.insert(root.get());
    while (!stack.empty()) {
        const Node* node = stack.back().first;
        const std::size_t next = stack.back().second;
        const bool walk_parents = !node->stop_grad && static_cast<bool>(node->back);
        if (walk_parents && next < node->parents.size()) {
            stack.back().second++;
            const Node* p = node->parents[next].get();
            if (seen.insert(p).second) stack.push_back({p, 0}); // may reallocate; no refs held
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    GradMap grads;
    grads.emplace(root.get(), Tensor::full(root->value.shape(), 1.0));

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const Node* node = *it;
        if (node->stop_grad || !node->back) continue;
        auto git = grads.find(node);
        if (git == grads.end()) continue;
        std::vector<Tensor> pg;
        pg.reserve(node->parents.size());
        for (const Value& p : node->parents) pg.emplace_back(Tensor::zeros(p->value.shape()));
        node->back(*node, git->second, pg);
        for (std::size_t i = 0; i < pg.size(); ++i) {
            const Node* p = node->parents[i].get();
            auto pit = grads.find(p);
            if (pit == grads.end())
                grads.emplace(p, std::move(pg[i]));
            else
                axpy(1.0, pg[i], pit->second);
        }
    }
    return grads;
}

const Tensor* grad_of(const GradMap& grads, const Value& v) {
    auto it = grads.find(v.get());
    return it == grads.end() ? nullptr : &it->second;
}

} // namespace emf::ad
