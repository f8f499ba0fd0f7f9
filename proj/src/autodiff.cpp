#include "lwal/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "lwal/errors.hpp"

namespace lwal {

namespace {

// C (m x n) += A (m x k) * B (k x n), sequential accumulation in k.
void mm_accum(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = c.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = pa[i * k + kk];
            const double* brow = pb + kk * n;
            double* crow = pc + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
}

// dA (m x k) += dC (m x n) * B^T (n x k)
void mm_accum_abt(const Tensor& dc, const Tensor& b, Tensor& da) {
    const std::size_t m = dc.rows(), n = dc.cols(), k = b.rows();
    const double* pdc = dc.data().data();
    const double* pb = b.data().data();
    double* pda = da.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double* dcrow = pdc + i * n;
            const double* brow = pb + kk * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                acc += dcrow[j] * brow[j];
            }
            pda[i * k + kk] += acc;
        }
    }
}

// dB (k x n) += A^T (k x m) * dC (m x n)
void mm_accum_atb(const Tensor& a, const Tensor& dc, Tensor& db) {
    const std::size_t m = a.rows(), k = a.cols(), n = dc.cols();
    const double* pa = a.data().data();
    const double* pdc = dc.data().data();
    double* pdb = db.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = pa[i * k + kk];
            const double* dcrow = pdc + i * n;
            double* dbrow = pdb + kk * n;
            for (std::size_t j = 0; j < n; ++j) {
                dbrow[j] += aik * dcrow[j];
            }
        }
    }
}

double vec_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

double vec_dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

} // namespace

Var Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> backprop,
               const char* op_name) {
    if (consumed_) {
        throw UsageError(std::string(op_name) + ": tape already consumed by backward");
    }
    if (!value.all_finite()) {
        throw NumericError(std::string(op_name) + " produced a non-finite value");
    }
    Node n;
    n.grad = Tensor::zeros(value.shape());
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
    if (v.id >= nodes_.size()) {
        throw UsageError("invalid Var handle");
    }
    return nodes_[v.id];
}

Tape::Node& Tape::node(Var v) {
    if (v.id >= nodes_.size()) {
        throw UsageError("invalid Var handle");
    }
    return nodes_[v.id];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

const Tensor& Tape::grad(Var v) const { return node(v).grad; }

Var Tape::leaf(Tensor value, bool requires_grad) {
    if (!value.all_finite()) {
        throw DomainError("leaf value contains non-finite entries");
    }
    return push(std::move(value), requires_grad, nullptr, "leaf");
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (va.ndim() != 2 || vb.ndim() != 2 || va.cols() != vb.rows()) {
        throw ShapeError("matmul: inner dimensions do not agree");
    }
    Tensor out({va.rows(), vb.cols()});
    mm_accum(va, vb, out);
    bool req = node(a).requires_grad || node(b).requires_grad;
    Var outv = push(std::move(out), req, nullptr, "matmul");
    node(outv).backprop = [a, b, outv](Tape& t) {
        const Tensor& g = t.node(outv).grad;
        if (t.node(a).requires_grad) {
            mm_accum_abt(g, t.node(b).value, t.node(a).grad);
        }
        if (t.node(b).requires_grad) {
            mm_accum_atb(t.node(a).value, g, t.node(b).grad);
        }
    };
    return outv;
}

Var Tape::add(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb)) {
        throw ShapeError("add: operand shapes differ");
    }
    Tensor out(va.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = va[i] + vb[i];
    }
    bool req = node(a).requires_grad || node(b).requires_grad;
    Var outv = push(std::move(out), req, nullptr, "add");
    node(outv).backprop = [a, b, outv](Tape& t) {
        const Tensor& g = t.node(outv).grad;
        if (t.node(a).requires_grad) {
            Tensor& ga = t.node(a).grad;
            for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        }
        if (t.node(b).requires_grad) {
            Tensor& gb = t.node(b).grad;
            for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
        }
    };
    return outv;
}

Var Tape::sub(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb)) {
        throw ShapeError("sub: operand shapes differ");
    }
    Tensor out(va.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = va[i] - vb[i];
    }
    bool req = node(a).requires_grad || node(b).requires_grad;
    Var outv = push(std::move(out), req, nullptr, "sub");
    node(outv).backprop = [a, b, outv](Tape& t) {
        const Tensor& g = t.node(outv).grad;
        if (t.node(a).requires_grad) {
            Tensor& ga = t.node(a).grad;
            for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        }
        if (t.node(b).requires_grad) {
            Tensor& gb = t.node(b).grad;
            for (std::size_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
        }
    };
    return outv;
}

Var Tape::mul(Var a, Var b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    if (!va.same_shape(vb)) {
        throw ShapeError("mul: operand shapes differ");
    }
    Tensor out(va.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = va[i] * vb[i];
    }
    bool req = node(a).requires_grad || node(b).requires_grad;
    Var outv = push(std::move(out), req, nullptr, "mul");
    node(outv).backprop = [a, b, outv](Tape& t) {
        const Tensor& g = t.node(outv).grad;
        if (t.node(a).requires_grad) {
            Tensor& ga = t.node(a).grad;
            const Tensor& vb2 = t.node(b).value;
            for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * vb2[i];
        }
        if (t.node(b).requires_grad) {
            Tensor& gb = t.node(b).grad;
            const Tensor& va2 = t.node(a).value;
            for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * va2[i];
        }
    };
    return outv;
}

Var Tape::scale(Var a, double c) {
    if (!std::isfinite(c)) {
        throw DomainError("scale: factor must be finite");
    }
    const Tensor& va = value(a);
    Tensor out(va.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = c * va[i];
    }
    bool req = node(a).requires_grad;
    Var outv = push(std::move(out), req, nullptr, "scale");
    node(outv).backprop = [a, c, outv](Tape& t) {
        if (!t.node(a).requires_grad) return;
        const Tensor& g = t.node(outv).grad;
        Tensor& ga = t.node(a).grad;
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += c * g[i];
    };
    return outv;
}

Var Tape::add_rowvec(Var a, Var bias) {
    const Tensor& va = value(a);
    const Tensor& vb = value(bias);
    if (va.ndim() != 2 || vb.ndim() != 1 || vb.shape()[0] != va.cols()) {
        throw ShapeError("add_rowvec: bias length must equal matrix column count");
    }
    const std::size_t m = va.rows(), n = va.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out[i * n + j] = va[i * n + j] + vb[j];
        }
    }
    bool req = node(a).requires_grad || node(bias).requires_grad;
    Var outv = push(std::move(out), req, nullptr, "add_rowvec");
    node(outv).backprop = [a, bias, outv, m, n](Tape& t) {
        const Tensor& g = t.node(outv).grad;
        if (t.node(a).requires_grad) {
            Tensor& ga = t.node(a).grad;
            for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        }
        if (t.node(bias).requires_grad) {
            Tensor& gb = t.node(bias).grad;
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    gb[j] += g[i * n + j];
                }
            }
        }
    };
    return outv;
}

Var Tape::relu(Var a) {
    const Tensor& va = value(a);
    Tensor out(va.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = va[i] > 0.0 ? va[i] : 0.0;
    }
    bool req = node(a).requires_grad;
    Var outv = push(std::move(out), req, nullptr, "relu");
    node(outv).backprop = [a, outv](Tape& t) {
        if (!t.node(a).requires_grad) return;
        const Tensor& g = t.node(outv).grad;
        const Tensor& x = t.node(a).value;
        Tensor& ga = t.node(a).grad;
        for (std::size_t i = 0; i < g.numel(); ++i) {
            if (x[i] > 0.0) ga[i] += g[i];
        }
    };
    return outv;
}

Var Tape::log(Var a) {
    const Tensor& va = value(a);
    Tensor out(va.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        if (va[i] <= 0.0) {
            throw DomainError("log: input must be strictly positive");
        }
        out[i] = std::log(va[i]);
    }
    bool req = node(a).requires_grad;
    Var outv = push(std::move(out), req, nullptr, "log");
    node(outv).backprop = [a, outv](Tape& t) {
        if (!t.node(a).requires_grad) return;
        const Tensor& g = t.node(outv).grad;
        const Tensor& x = t.node(a).value;
        Tensor& ga = t.node(a).grad;
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] / x[i];
    };
    return outv;
}

Var Tape::exp(Var a) {
    const Tensor& va = value(a);
    Tensor out(va.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = std::exp(va[i]);
    }
    bool req = node(a).requires_grad;
    Var outv = push(std::move(out), req, nullptr, "exp");
    node(outv).backprop = [a, outv](Tape& t) {
        if (!t.node(a).requires_grad) return;
        const Tensor& g = t.node(outv).grad;
        const Tensor& y = t.node(outv).value;
        Tensor& ga = t.node(a).grad;
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * y[i];
    };
    return outv;
}

Var Tape::sum(Var a) {
    const Tensor& va = value(a);
    double s = 0.0;
    for (std::size_t i = 0; i < va.numel(); ++i) {
        s += va[i];
    }
    bool req = node(a).requires_grad;
    Var outv = push(Tensor::scalar(s), req, nullptr, "sum");
    node(outv).backprop = [a, outv](Tape& t) {
        if (!t.node(a).requires_grad) return;
        const double g = t.node(outv).grad[0];
        Tensor& ga = t.node(a).grad;
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
    };
    return outv;
}

Var Tape::row_softmax(Var logits) {
    const Tensor& x = value(logits);
    if (x.ndim() != 2) {
        throw ShapeError("row_softmax: expected a matrix");
    }
    const std::size_t m = x.rows(), n = x.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        double mx = x[i * n];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[i * n + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double e = std::exp(x[i * n + j] - mx);
            out[i * n + j] = e;
            denom += e;
        }
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= denom;
    }
    bool req = node(logits).requires_grad;
    Var outv = push(std::move(out), req, nullptr, "row_softmax");
    node(outv).backprop = [logits, outv, m, n](Tape& t) {
        if (!t.node(logits).requires_grad) return;
        const Tensor& g = t.node(outv).grad;
        const Tensor& p = t.node(outv).value;
        Tensor& gx = t.node(logits).grad;
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * p[i * n + j];
            for (std::size_t j = 0; j < n; ++j) {
                gx[i * n + j] += p[i * n + j] * (g[i * n + j] - dot);
            }
        }
    };
    return outv;
}

Var Tape::row_l2_distance(Var z, Var centers) {
    const Tensor& vz = value(z);
    const Tensor& vc = value(centers);
    if (vz.ndim() != 2 || vc.ndim() != 2 || vz.cols() != vc.cols()) {
        throw ShapeError("row_l2_distance: latent dimensions differ");
    }
    const std::size_t m = vz.rows(), d = vz.cols(), nc = vc.rows();
    Tensor out({m, nc});
    for (std::size_t i = 0; i < m; ++i) {
        const double* zr = vz.data().data() + i * d;
        for (std::size_t j = 0; j < nc; ++j) {
            const double* cr = vc.data().data() + j * d;
            double s = kDistanceEps;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = zr[k] - cr[k];
                s += diff * diff;
            }
            out[i * nc + j] = std::sqrt(s);
        }
    }
    bool req = node(z).requires_grad || node(centers).requires_grad;
    Var outv = push(std::move(out), req, nullptr, "row_l2_distance");
    node(outv).backprop = [z, centers, outv, m, d, nc](Tape& t) {
        const Tensor& g = t.node(outv).grad;
        const Tensor& dist = t.node(outv).value;
        const Tensor& vz2 = t.node(z).value;
        const Tensor& vc2 = t.node(centers).value;
        const bool reqz = t.node(z).requires_grad;
        const bool reqc = t.node(centers).requires_grad;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < nc; ++j) {
                const double w = g[i * nc + j] / dist[i * nc + j];
                if (w == 0.0) continue;
                for (std::size_t k = 0; k < d; ++k) {
                    const double diff = vz2[i * d + k] - vc2[j * d + k];
                    if (reqz) t.node(z).grad[i * d + k] += w * diff;
                    if (reqc) t.node(centers).grad[j * d + k] -= w * diff;
                }
            }
        }
    };
    return outv;
}

Var Tape::cosine_sim(Var u, Var v) {
    const Tensor& vu = value(u);
    const Tensor& vv = value(v);
    if (vu.ndim() != 1 || vv.ndim() != 1 || vu.numel() != vv.numel()) {
        throw ShapeError("cosine_sim: expected two vectors of equal length");
    }
    const double nu = vec_norm(vu.data());
    const double nv = vec_norm(vv.data());
    if (nu <= kDegenerateNorm || nv <= kDegenerateNorm) {
        throw DomainError("cosine_sim: degenerate (near-zero) vector");
    }
    const double s = vec_dot(vu.data(), vv.data()) / (nu * nv);
    bool req = node(u).requires_grad || node(v).requires_grad;
    Var outv = push(Tensor::scalar(s), req, nullptr, "cosine_sim");
    node(outv).backprop = [u, v, outv, nu, nv, s](Tape& t) {
        const double g = t.node(outv).grad[0];
        const Tensor& vu2 = t.node(u).value;
        const Tensor& vv2 = t.node(v).value;
        const std::size_t d = vu2.numel();
        if (t.node(u).requires_grad) {
            Tensor& gu = t.node(u).grad;
            for (std::size_t k = 0; k < d; ++k) {
                gu[k] += g * (vv2[k] / (nu * nv) - s * vu2[k] / (nu * nu));
            }
        }
        if (t.node(v).requires_grad) {
            Tensor& gv = t.node(v).grad;
            for (std::size_t k = 0; k < d; ++k) {
                gv[k] += g * (vu2[k] / (nu * nv) - s * vv2[k] / (nv * nv));
            }
        }
    };
    return outv;
}

Var Tape::nll_mean(Var probs, std::vector<int> labels) {
    const Tensor& p = value(probs);
    if (p.ndim() != 2) {
        throw ShapeError("nll_mean: expected a probability matrix");
    }
    const std::size_t m = p.rows(), n = p.cols();
    if (labels.size() != m) {
        throw ShapeError("nll_mean: one label per row required");
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= n) {
            throw DomainError("nll_mean: label out of range");
        }
        const double pi = p[i * n + static_cast<std::size_t>(y)];
        if (pi <= 0.0) {
            throw DomainError("nll_mean: picked probability is not positive");
        }
        loss -= std::log(pi);
    }
    loss /= static_cast<double>(m);
    bool req = node(probs).requires_grad;
    Var outv = push(Tensor::scalar(loss), req, nullptr, "nll_mean");
    node(outv).backprop = [probs, outv, labels = std::move(labels), m, n](Tape& t) {
        if (!t.node(probs).requires_grad) return;
        const double g = t.node(outv).grad[0];
        const Tensor& p2 = t.node(probs).value;
        Tensor& gp = t.node(probs).grad;
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t j = static_cast<std::size_t>(labels[i]);
            gp[i * n + j] -= g / (static_cast<double>(m) * p2[i * n + j]);
        }
    };
    return outv;
}

Var Tape::repel_sum(Var z, std::vector<int> labels, std::size_t* skipped_rows) {
    const Tensor& vz = value(z);
    if (vz.ndim() != 2) {
        throw ShapeError("repel_sum: expected an encoding matrix");
    }
    const std::size_t m = vz.rows(), d = vz.cols();
    if (labels.size() != m) {
        throw ShapeError("repel_sum: one label per row required");
    }
    std::vector<double> norms(m);
    std::vector<char> degenerate(m, 0);
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < m; ++i) {
        norms[i] = vec_norm(vz.row_span(i));
        if (norms[i] <= kDegenerateNorm) {
            degenerate[i] = 1;
            ++skipped;
        }
    }
    if (skipped_rows != nullptr) {
        *skipped_rows = skipped;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (degenerate[i]) continue;
        for (std::size_t j = i + 1; j < m; ++j) {
            if (degenerate[j] || labels[i] == labels[j]) continue;
            total += vec_dot(vz.row_span(i), vz.row_span(j)) / (norms[i] * norms[j]);
        }
    }
    bool req = node(z).requires_grad;
    Var outv = push(Tensor::scalar(total), req, nullptr, "repel_sum");
    node(outv).backprop = [z, outv, labels = std::move(labels), norms = std::move(norms),
                           degenerate = std::move(degenerate), m, d](Tape& t) {
        if (!t.node(z).requires_grad) return;
        const double g = t.node(outv).grad[0];
        const Tensor& vz2 = t.node(z).value;
        Tensor& gz = t.node(z).grad;
        for (std::size_t i = 0; i < m; ++i) {
            if (degenerate[i]) continue;
            for (std::size_t j = i + 1; j < m; ++j) {
                if (degenerate[j] || labels[i] == labels[j]) continue;
                const double* zi = vz2.data().data() + i * d;
                const double* zj = vz2.data().data() + j * d;
                const double nn = norms[i] * norms[j];
                double dot = 0.0;
                for (std::size_t k = 0; k < d; ++k) dot += zi[k] * zj[k];
                const double s = dot / nn;
                for (std::size_t k = 0; k < d; ++k) {
                    gz[i * d + k] += g * (zj[k] / nn - s * zi[k] / (norms[i] * norms[i]));
                    gz[j * d + k] += g * (zi[k] / nn - s * zj[k] / (norms[j] * norms[j]));
                }
            }
        }
    };
    return outv;
}

void Tape::backward(Var root) {
    if (consumed_) {
        throw UsageError("backward: tape already consumed; rebuild the graph first");
    }
    Node& r = node(root);
    if (r.value.numel() != 1) {
        throw UsageError("backward: root must be a scalar");
    }
    if (nodes_.empty()) {
        throw UsageError("backward: empty tape");
    }
    consumed_ = true;
    r.grad[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        Node& n = nodes_[i];
        if (n.requires_grad && n.backprop) {
            n.backprop(*this);
        }
    }
    for (Node& n : nodes_) {
        n.backprop = nullptr;
    }
}

double grad_check(const std::function<Var(Tape&, Var)>& fn, const Tensor& x, double h) {
    Tensor analytic;
    {
        Tape tape;
        Var xv = tape.leaf(x, /*requires_grad=*/true);
        Var y = fn(tape, xv);
        if (tape.value(y).numel() != 1) {
            throw UsageError("grad_check: function must be scalar-valued");
        }
        tape.backward(y);
        analytic = tape.grad(xv);
    }
    auto eval = [&fn](const Tensor& at) {
        Tape tape;
        Var xv = tape.leaf(at, /*requires_grad=*/false);
        Var y = fn(tape, xv);
        return tape.value(y)[0];
    };
    double max_err = 0.0;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double fp = eval(probe);
        probe[i] = orig - h;
        const double fm = eval(probe);
        probe[i] = orig;
        const double numeric = (fp - fm) / (2.0 * h);
        const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
        max_err = std::max(max_err, err);
    }
    return max_err;
}

} // namespace lwal
