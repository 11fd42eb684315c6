// SPDX-License-Identifier: Apache-2.0
#include "cbert/tape.hpp"

#include <algorithm>
#include <cmath>

namespace cbert {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shapes differ: " + a.shape_str() + " vs " +
                         b.shape_str());
    }
}

void check_2d(const char* op, const Tensor& t) {
    if (t.ndim() != 2) {
        throw ShapeError(std::string(op) + ": expected 2-D tensor, got " + t.shape_str());
    }
}
}  // namespace

const Tape::Node& Tape::node(Value v) const {
    if (!v.valid() || static_cast<size_t>(v.id) >= nodes_.size()) {
        throw Error("tape: invalid value handle");
    }
    return nodes_[static_cast<size_t>(v.id)];
}

bool Tape::any_requires_grad(const std::vector<int32_t>& inputs) const {
    for (int32_t id : inputs) {
        if (nodes_[static_cast<size_t>(id)].requires_grad) return true;
    }
    return false;
}

Value Tape::push(std::string op, std::vector<int32_t> inputs, Tensor out,
                 std::function<void(Tape&, const Tensor&)> bw) {
    if (!out.all_finite()) {
        throw NumericError("op '" + op + "' produced non-finite values");
    }
    Node n;
    n.op = std::move(op);
    n.requires_grad = !inputs.empty() && any_requires_grad(inputs);
    n.inputs = std::move(inputs);
    n.out = std::move(out);
    if (n.requires_grad) n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Value{static_cast<int32_t>(nodes_.size() - 1)};
}

Value Tape::leaf(Tensor t) {
    if (!t.all_finite()) throw NumericError("leaf tensor contains non-finite values");
    Node n;
    n.op = "leaf";
    n.requires_grad = t.requires_grad;
    n.out = std::move(t);
    nodes_.push_back(std::move(n));
    return Value{static_cast<int32_t>(nodes_.size() - 1)};
}

Value Tape::constant(Tensor t) {
    t.requires_grad = false;
    return leaf(std::move(t));
}

const Tensor* Tape::maybe_grad(Value v) const {
    if (!v.valid() || static_cast<size_t>(v.id) >= grads_.size()) return nullptr;
    const Tensor& g = grads_[static_cast<size_t>(v.id)];
    return g.empty() ? nullptr : &g;
}

Tensor Tape::grad_or_zeros(Value v) const {
    if (const Tensor* g = maybe_grad(v)) return *g;
    return Tensor::zeros(node(v).out.shape());
}

void Tape::accumulate(int32_t id, const Tensor& delta) { accumulate_scaled(id, delta, 1.0); }

void Tape::accumulate_scaled(int32_t id, const Tensor& delta, double c) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.requires_grad) return;
    Tensor& g = grads_[static_cast<size_t>(id)];
    if (g.empty()) g = Tensor::zeros(n.out.shape());
    const size_t m = static_cast<size_t>(delta.numel());
    for (size_t i = 0; i < m; ++i) g[i] += c * delta[i];
}

void Tape::backward(Value root) {
    const Node& r = node(root);
    if (r.out.numel() != 1) {
        throw ShapeError("backward: root must be scalar, got " + r.out.shape_str());
    }
    grads_.assign(nodes_.size(), Tensor{});
    grads_[static_cast<size_t>(root.id)] = Tensor::full(r.out.shape(), 1.0);
    for (int32_t i = root.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        const Tensor& g = grads_[static_cast<size_t>(i)];
        if (g.empty() || !n.backward) continue;
        n.backward(*this, g);
    }
}

Value Tape::add(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check_same_shape("add", ta, tb);
    Tensor out(ta.shape());
    const size_t n = static_cast<size_t>(ta.numel());
    for (size_t i = 0; i < n; ++i) out[i] = ta[i] + tb[i];
    return push("add", {a.id, b.id}, std::move(out), [a, b](Tape& t, const Tensor& g) {
        t.accumulate(a.id, g);
        t.accumulate(b.id, g);
    });
}

Value Tape::mul(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check_same_shape("mul", ta, tb);
    Tensor out(ta.shape());
    const size_t n = static_cast<size_t>(ta.numel());
    for (size_t i = 0; i < n; ++i) out[i] = ta[i] * tb[i];
    return push("mul", {a.id, b.id}, std::move(out), [a, b](Tape& t, const Tensor& g) {
        const Tensor& ta = t.value(a);
        const Tensor& tb = t.value(b);
        const size_t n = static_cast<size_t>(g.numel());
        if (t.nodes_[static_cast<size_t>(a.id)].requires_grad) {
            Tensor da(ta.shape());
            for (size_t i = 0; i < n; ++i) da[i] = g[i] * tb[i];
            t.accumulate(a.id, da);
        }
        if (t.nodes_[static_cast<size_t>(b.id)].requires_grad) {
            Tensor db(tb.shape());
            for (size_t i = 0; i < n; ++i) db[i] = g[i] * ta[i];
            t.accumulate(b.id, db);
        }
    });
}

Value Tape::scale(Value a, double c) {
    const Tensor& ta = value(a);
    Tensor out(ta.shape());
    const size_t n = static_cast<size_t>(ta.numel());
    for (size_t i = 0; i < n; ++i) out[i] = c * ta[i];
    return push("scale", {a.id}, std::move(out), [a, c](Tape& t, const Tensor& g) {
        t.accumulate_scaled(a.id, g, c);
    });
}

Value Tape::add_row(Value m, Value row) {
    const Tensor& tm = value(m);
    const Tensor& tr = value(row);
    check_2d("add_row", tm);
    if (tr.ndim() != 1 || tr.extent(0) != tm.cols()) {
        throw ShapeError("add_row: row " + tr.shape_str() + " does not match matrix " +
                         tm.shape_str());
    }
    Tensor out(tm.shape());
    for (int r = 0; r < tm.rows(); ++r) {
        for (int c = 0; c < tm.cols(); ++c) out.at(r, c) = tm.at(r, c) + tr[static_cast<size_t>(c)];
    }
    return push("add_row", {m.id, row.id}, std::move(out), [m, row](Tape& t, const Tensor& g) {
        t.accumulate(m.id, g);
        if (t.nodes_[static_cast<size_t>(row.id)].requires_grad) {
            Tensor dr({g.cols()});
            for (int r = 0; r < g.rows(); ++r) {
                for (int c = 0; c < g.cols(); ++c) dr[static_cast<size_t>(c)] += g.at(r, c);
            }
            t.accumulate(row.id, dr);
        }
    });
}

Value Tape::matmul(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check_2d("matmul", ta);
    check_2d("matmul", tb);
    if (ta.cols() != tb.rows()) {
        throw ShapeError("matmul: inner extents differ: " + ta.shape_str() + " vs " +
                         tb.shape_str());
    }
    const int m = ta.rows(), k = ta.cols(), n = tb.cols();
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < k; ++j) {
            const double aij = ta.at(i, j);
            if (aij == 0.0) continue;
            for (int c = 0; c < n; ++c) out.at(i, c) += aij * tb.at(j, c);
        }
    }
    return push("matmul", {a.id, b.id}, std::move(out), [a, b](Tape& t, const Tensor& g) {
        const Tensor& ta = t.value(a);
        const Tensor& tb = t.value(b);
        const int m = ta.rows(), k = ta.cols(), n = tb.cols();
        if (t.nodes_[static_cast<size_t>(a.id)].requires_grad) {
            Tensor da({m, k});  // g . b^T
            for (int i = 0; i < m; ++i) {
                for (int c = 0; c < n; ++c) {
                    const double gic = g.at(i, c);
                    if (gic == 0.0) continue;
                    for (int j = 0; j < k; ++j) da.at(i, j) += gic * tb.at(j, c);
                }
            }
            t.accumulate(a.id, da);
        }
        if (t.nodes_[static_cast<size_t>(b.id)].requires_grad) {
            Tensor db({k, n});  // a^T . g
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < k; ++j) {
                    const double aij = ta.at(i, j);
                    if (aij == 0.0) continue;
                    for (int c = 0; c < n; ++c) db.at(j, c) += aij * g.at(i, c);
                }
            }
            t.accumulate(b.id, db);
        }
    });
}

Value Tape::transpose(Value a) {
    const Tensor& ta = value(a);
    check_2d("transpose", ta);
    Tensor out({ta.cols(), ta.rows()});
    for (int r = 0; r < ta.rows(); ++r) {
        for (int c = 0; c < ta.cols(); ++c) out.at(c, r) = ta.at(r, c);
    }
    return push("transpose", {a.id}, std::move(out), [a](Tape& t, const Tensor& g) {
        Tensor da({g.cols(), g.rows()});
        for (int r = 0; r < g.rows(); ++r) {
            for (int c = 0; c < g.cols(); ++c) da.at(c, r) = g.at(r, c);
        }
        t.accumulate(a.id, da);
    });
}

Value Tape::softmax(Value a, int axis) {
    const Tensor& ta = value(a);
    if (axis < 0) axis += ta.ndim();
    if (axis < 0 || axis >= ta.ndim()) {
        throw ShapeError("softmax: axis out of range for " + ta.shape_str());
    }
    const int n = ta.shape()[static_cast<size_t>(axis)];
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= ta.shape()[static_cast<size_t>(i)];
    for (int i = axis + 1; i < ta.ndim(); ++i) inner *= ta.shape()[static_cast<size_t>(i)];

    Tensor out(ta.shape());
    for (int64_t o = 0; o < outer; ++o) {
        for (int64_t in = 0; in < inner; ++in) {
            const auto idx = [&](int j) {
                return static_cast<size_t>((o * n + j) * inner + in);
            };
            double mx = ta[idx(0)];
            for (int j = 1; j < n; ++j) mx = std::max(mx, ta[idx(j)]);
            double sum = 0.0;
            for (int j = 0; j < n; ++j) {
                const double e = std::exp(ta[idx(j)] - mx);
                out[idx(j)] = e;
                sum += e;
            }
            for (int j = 0; j < n; ++j) out[idx(j)] /= sum;
        }
    }
    Tensor saved = out;  // y itself is what backward needs
    Value v = push("softmax", {a.id}, std::move(out),
                   [a, n, outer, inner, y = std::move(saved)](Tape& t, const Tensor& g) {
                       // dx = y * (g - sum(g*y)) per slice
                       Tensor da(y.shape());
                       for (int64_t o = 0; o < outer; ++o) {
                           for (int64_t in = 0; in < inner; ++in) {
                               const auto idx = [&](int j) {
                                   return static_cast<size_t>((o * n + j) * inner + in);
                               };
                               double dot = 0.0;
                               for (int j = 0; j < n; ++j) dot += g[idx(j)] * y[idx(j)];
                               for (int j = 0; j < n; ++j) {
                                   da[idx(j)] = y[idx(j)] * (g[idx(j)] - dot);
                               }
                           }
                       }
                       t.accumulate(a.id, da);
                   });
    return v;
}

Value Tape::layer_norm(Value x, Value gain, Value bias, double eps) {
    const Tensor& tx = value(x);
    const Tensor& tg = value(gain);
    const Tensor& tb = value(bias);
    if (tx.ndim() < 1) throw ShapeError("layer_norm: input must have at least 1 axis");
    const int d = tx.shape().back();
    if (d < 2) throw ShapeError("layer_norm: last extent must be >= 2, got " + std::to_string(d));
    if (tg.ndim() != 1 || tg.extent(0) != d || tb.ndim() != 1 || tb.extent(0) != d) {
        throw ShapeError("layer_norm: gain/bias must be [" + std::to_string(d) + "]");
    }
    const int64_t rows = tx.numel() / d;
    Tensor out(tx.shape());
    std::vector<double> inv_sigma(static_cast<size_t>(rows));
    std::vector<double> xhat(static_cast<size_t>(tx.numel()));
    for (int64_t r = 0; r < rows; ++r) {
        const size_t base = static_cast<size_t>(r) * d;
        double mean = 0.0;
        for (int j = 0; j < d; ++j) mean += tx[base + j];
        mean /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) {
            const double c = tx[base + j] - mean;
            var += c * c;
        }
        var /= d;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[static_cast<size_t>(r)] = is;
        for (int j = 0; j < d; ++j) {
            const double h = (tx[base + j] - mean) * is;
            xhat[base + j] = h;
            out[base + j] = tg[static_cast<size_t>(j)] * h + tb[static_cast<size_t>(j)];
        }
    }
    return push("layer_norm", {x.id, gain.id, bias.id}, std::move(out),
                [x, gain, bias, d, rows, inv_sigma = std::move(inv_sigma),
                 xhat = std::move(xhat)](Tape& t, const Tensor& g) {
                    const Tensor& tg = t.value(gain);
                    if (t.nodes_[static_cast<size_t>(x.id)].requires_grad) {
                        Tensor dx(t.value(x).shape());
                        for (int64_t r = 0; r < rows; ++r) {
                            const size_t base = static_cast<size_t>(r) * d;
                            double mean_gh = 0.0, mean_ghx = 0.0;
                            for (int j = 0; j < d; ++j) {
                                const double gh = g[base + j] * tg[static_cast<size_t>(j)];
                                mean_gh += gh;
                                mean_ghx += gh * xhat[base + j];
                            }
                            mean_gh /= d;
                            mean_ghx /= d;
                            const double is = inv_sigma[static_cast<size_t>(r)];
                            for (int j = 0; j < d; ++j) {
                                const double gh = g[base + j] * tg[static_cast<size_t>(j)];
                                dx[base + j] = is * (gh - mean_gh - xhat[base + j] * mean_ghx);
                            }
                        }
                        t.accumulate(x.id, dx);
                    }
                    if (t.nodes_[static_cast<size_t>(gain.id)].requires_grad) {
                        Tensor dg({d});
                        for (int64_t r = 0; r < rows; ++r) {
                            const size_t base = static_cast<size_t>(r) * d;
                            for (int j = 0; j < d; ++j) {
                                dg[static_cast<size_t>(j)] += g[base + j] * xhat[base + j];
                            }
                        }
                        t.accumulate(gain.id, dg);
                    }
                    if (t.nodes_[static_cast<size_t>(bias.id)].requires_grad) {
                        Tensor db({d});
                        for (int64_t r = 0; r < rows; ++r) {
                            const size_t base = static_cast<size_t>(r) * d;
                            for (int j = 0; j < d; ++j) db[static_cast<size_t>(j)] += g[base + j];
                        }
                        t.accumulate(bias.id, db);
                    }
                });
}

Value Tape::gelu(Value x) {
    const Tensor& tx = value(x);
    Tensor out(tx.shape());
    const size_t n = static_cast<size_t>(tx.numel());
    for (size_t i = 0; i < n; ++i) {
        const double v = tx[i];
        out[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    }
    return push("gelu", {x.id}, std::move(out), [x](Tape& t, const Tensor& g) {
        const Tensor& tx = t.value(x);
        Tensor dx(tx.shape());
        const size_t n = static_cast<size_t>(tx.numel());
        for (size_t i = 0; i < n; ++i) {
            const double v = tx[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
            dx[i] = g[i] * (cdf + v * pdf);
        }
        t.accumulate(x.id, dx);
    });
}

Value Tape::conv1d_maxpool(Value seq, Value filters, Value bias, int width) {
    const Tensor& ts = value(seq);
    const Tensor& tf = value(filters);
    const Tensor& tb = value(bias);
    check_2d("conv1d_maxpool", ts);
    check_2d("conv1d_maxpool", tf);
    const int t_len = ts.rows(), e = ts.cols();
    const int f = tf.rows();
    if (width < 1) throw ShapeError("conv1d_maxpool: width must be >= 1");
    if (t_len < width) {
        throw ShapeError("conv1d_maxpool: sequence too short: T=" + std::to_string(t_len) +
                         " < width=" + std::to_string(width));
    }
    if (tf.cols() != width * e) {
        throw ShapeError("conv1d_maxpool: filters " + tf.shape_str() + " do not match width*E=" +
                         std::to_string(width * e));
    }
    if (tb.ndim() != 1 || tb.extent(0) != f) {
        throw ShapeError("conv1d_maxpool: bias must be [" + std::to_string(f) + "]");
    }
    const int windows = t_len - width + 1;
    Tensor out({f});
    std::vector<int> argmax(static_cast<size_t>(f));
    for (int fi = 0; fi < f; ++fi) {
        double best = 0.0;
        int best_w = 0;
        for (int w = 0; w < windows; ++w) {
            double r = tb[static_cast<size_t>(fi)];
            for (int j = 0; j < width; ++j) {
                for (int c = 0; c < e; ++c) {
                    r += tf.at(fi, j * e + c) * ts.at(w + j, c);
                }
            }
            if (w == 0 || r > best) {  // ties keep the earliest window
                best = r;
                best_w = w;
            }
        }
        out[static_cast<size_t>(fi)] = best;
        argmax[static_cast<size_t>(fi)] = best_w;
    }
    return push("conv1d_maxpool", {seq.id, filters.id, bias.id}, std::move(out),
                [seq, filters, bias, width, e, f, argmax = std::move(argmax)](Tape& t,
                                                                              const Tensor& g) {
                    const Tensor& ts = t.value(seq);
                    const Tensor& tf = t.value(filters);
                    const bool need_seq = t.nodes_[static_cast<size_t>(seq.id)].requires_grad;
                    const bool need_fil = t.nodes_[static_cast<size_t>(filters.id)].requires_grad;
                    const bool need_bias = t.nodes_[static_cast<size_t>(bias.id)].requires_grad;
                    Tensor dseq(ts.shape());
                    Tensor dfil(tf.shape());
                    Tensor dbias({f});
                    for (int fi = 0; fi < f; ++fi) {
                        const double gf = g[static_cast<size_t>(fi)];
                        if (gf == 0.0) continue;
                        const int w = argmax[static_cast<size_t>(fi)];
                        dbias[static_cast<size_t>(fi)] += gf;
                        for (int j = 0; j < width; ++j) {
                            for (int c = 0; c < e; ++c) {
                                if (need_seq) dseq.at(w + j, c) += gf * tf.at(fi, j * e + c);
                                if (need_fil) dfil.at(fi, j * e + c) += gf * ts.at(w + j, c);
                            }
                        }
                    }
                    if (need_seq) t.accumulate(seq.id, dseq);
                    if (need_fil) t.accumulate(filters.id, dfil);
                    if (need_bias) t.accumulate(bias.id, dbias);
                });
}

Value Tape::cross_entropy_masked(Value logits, std::span<const int> labels, int ignore_id) {
    const Tensor& tl = value(logits);
    check_2d("cross_entropy_masked", tl);
    const int t_len = tl.rows(), v = tl.cols();
    if (static_cast<int>(labels.size()) != t_len) {
        throw ShapeError("cross_entropy_masked: labels length " + std::to_string(labels.size()) +
                         " does not match T=" + std::to_string(t_len));
    }
    int labeled = 0;
    double loss = 0.0;
    for (int t = 0; t < t_len; ++t) {
        const int y = labels[static_cast<size_t>(t)];
        if (y == ignore_id) continue;
        if (y < 0 || y >= v) {
            throw ShapeError("cross_entropy_masked: label " + std::to_string(y) +
                             " out of range [0," + std::to_string(v) + ")");
        }
        ++labeled;
        double mx = tl.at(t, 0);
        for (int j = 1; j < v; ++j) mx = std::max(mx, tl.at(t, j));
        double sum = 0.0;
        for (int j = 0; j < v; ++j) sum += std::exp(tl.at(t, j) - mx);
        loss += std::log(sum) + mx - tl.at(t, y);
    }
    if (labeled == 0) {
        throw Error("cross_entropy_masked: all positions ignored, loss is empty");
    }
    loss /= labeled;
    std::vector<int> ylab(labels.begin(), labels.end());
    return push("cross_entropy_masked", {logits.id}, Tensor::scalar(loss),
                [logits, ylab = std::move(ylab), ignore_id, labeled](Tape& t, const Tensor& g) {
                    const Tensor& tl = t.value(logits);
                    const int t_len = tl.rows(), v = tl.cols();
                    const double go = g[0] / labeled;
                    Tensor dl(tl.shape());
                    for (int r = 0; r < t_len; ++r) {
                        const int y = ylab[static_cast<size_t>(r)];
                        if (y == ignore_id) continue;
                        double mx = tl.at(r, 0);
                        for (int j = 1; j < v; ++j) mx = std::max(mx, tl.at(r, j));
                        double sum = 0.0;
                        for (int j = 0; j < v; ++j) sum += std::exp(tl.at(r, j) - mx);
                        for (int j = 0; j < v; ++j) {
                            const double p = std::exp(tl.at(r, j) - mx) / sum;
                            dl.at(r, j) = go * (p - (j == y ? 1.0 : 0.0));
                        }
                    }
                    t.accumulate(logits.id, dl);
                });
}

Value Tape::gather_rows(Value table, std::span<const int> ids) {
    const Tensor& tt = value(table);
    check_2d("gather_rows", tt);
    const int rows = tt.rows(), c = tt.cols();
    const int n = static_cast<int>(ids.size());
    if (n == 0) throw ShapeError("gather_rows: empty id list");
    Tensor out({n, c});
    for (int i = 0; i < n; ++i) {
        const int r = ids[static_cast<size_t>(i)];
        if (r < 0 || r >= rows) {
            throw ShapeError("gather_rows: id " + std::to_string(r) + " out of range [0," +
                             std::to_string(rows) + ")");
        }
        for (int j = 0; j < c; ++j) out.at(i, j) = tt.at(r, j);
    }
    std::vector<int> idv(ids.begin(), ids.end());
    return push("gather_rows", {table.id}, std::move(out),
                [table, idv = std::move(idv), c](Tape& t, const Tensor& g) {
                    Tensor dt(t.value(table).shape());
                    for (size_t i = 0; i < idv.size(); ++i) {
                        const int r = idv[i];
                        for (int j = 0; j < c; ++j) {
                            dt.at(r, j) += g.at(static_cast<int>(i), j);
                        }
                    }
                    t.accumulate(table.id, dt);
                });
}

Value Tape::concat_last(std::span<const Value> parts) {
    if (parts.empty()) throw ShapeError("concat_last: no parts");
    if (parts.size() == 1) {
        // Identity; still recorded so gradients route through.
        Value a = parts[0];
        Tensor out = value(a);
        return push("concat_last", {a.id}, std::move(out),
                    [a](Tape& t, const Tensor& g) { t.accumulate(a.id, g); });
    }
    const Tensor& t0 = value(parts[0]);
    std::vector<int> lead(t0.shape().begin(), t0.shape().end() - 1);
    int total_last = 0;
    std::vector<int32_t> inputs;
    std::vector<int> widths;
    for (Value p : parts) {
        const Tensor& tp = value(p);
        if (tp.ndim() != t0.ndim() ||
            !std::equal(lead.begin(), lead.end(), tp.shape().begin())) {
            throw ShapeError("concat_last: leading extents differ: " + t0.shape_str() + " vs " +
                             tp.shape_str());
        }
        widths.push_back(tp.shape().back());
        total_last += tp.shape().back();
        inputs.push_back(p.id);
    }
    std::vector<int> out_shape = lead;
    out_shape.push_back(total_last);
    int64_t outer = 1;
    for (int e : lead) outer *= e;
    Tensor out(out_shape);
    int offset = 0;
    for (size_t pi = 0; pi < parts.size(); ++pi) {
        const Tensor& tp = value(parts[pi]);
        const int w = widths[pi];
        for (int64_t o = 0; o < outer; ++o) {
            for (int j = 0; j < w; ++j) {
                out[static_cast<size_t>(o * total_last + offset + j)] =
                    tp[static_cast<size_t>(o * w + j)];
            }
        }
        offset += w;
    }
    std::vector<int32_t> saved_inputs = inputs;
    return push("concat_last", std::move(inputs), std::move(out),
                [widths, total_last, outer,
                 in_ids = std::move(saved_inputs)](Tape& t, const Tensor& g) {
                    int offset = 0;
                    for (size_t pi = 0; pi < in_ids.size(); ++pi) {
                        const int32_t in_id = in_ids[pi];
                        const int w = widths[pi];
                        if (t.nodes_[static_cast<size_t>(in_id)].requires_grad) {
                            Tensor dp(t.nodes_[static_cast<size_t>(in_id)].out.shape());
                            for (int64_t o = 0; o < outer; ++o) {
                                for (int j = 0; j < w; ++j) {
                                    dp[static_cast<size_t>(o * w + j)] =
                                        g[static_cast<size_t>(o * total_last + offset + j)];
                                }
                            }
                            t.accumulate(in_id, dp);
                        }
                        offset += w;
                    }
                });
}

Value Tape::slice_cols(Value m, int col_begin, int col_end) {
    const Tensor& tm = value(m);
    check_2d("slice_cols", tm);
    if (col_begin < 0 || col_end > tm.cols() || col_begin >= col_end) {
        throw ShapeError("slice_cols: bad range [" + std::to_string(col_begin) + "," +
                         std::to_string(col_end) + ") for " + tm.shape_str());
    }
    const int w = col_end - col_begin;
    Tensor out({tm.rows(), w});
    for (int r = 0; r < tm.rows(); ++r) {
        for (int c = 0; c < w; ++c) out.at(r, c) = tm.at(r, col_begin + c);
    }
    return push("slice_cols", {m.id}, std::move(out),
                [m, col_begin, w](Tape& t, const Tensor& g) {
                    Tensor dm(t.value(m).shape());
                    for (int r = 0; r < g.rows(); ++r) {
                        for (int c = 0; c < w; ++c) dm.at(r, col_begin + c) = g.at(r, c);
                    }
                    t.accumulate(m.id, dm);
                });
}

Value Tape::stack_rows(std::span<const Value> rows) {
    if (rows.empty()) throw ShapeError("stack_rows: no rows");
    const Tensor& t0 = value(rows[0]);
    if (t0.ndim() != 1) throw ShapeError("stack_rows: rows must be 1-D, got " + t0.shape_str());
    const int n = t0.extent(0);
    std::vector<int32_t> inputs;
    Tensor out({static_cast<int>(rows.size()), n});
    for (size_t i = 0; i < rows.size(); ++i) {
        const Tensor& tr = value(rows[i]);
        if (tr.ndim() != 1 || tr.extent(0) != n) {
            throw ShapeError("stack_rows: row shapes differ: " + t0.shape_str() + " vs " +
                             tr.shape_str());
        }
        for (int j = 0; j < n; ++j) out.at(static_cast<int>(i), j) = tr[static_cast<size_t>(j)];
        inputs.push_back(rows[i].id);
    }
    std::vector<int32_t> saved_inputs = inputs;
    return push("stack_rows", std::move(inputs), std::move(out),
                [n, in_ids = std::move(saved_inputs)](Tape& t, const Tensor& g) {
                    for (size_t i = 0; i < in_ids.size(); ++i) {
                        const int32_t in_id = in_ids[i];
                        if (!t.nodes_[static_cast<size_t>(in_id)].requires_grad) continue;
                        Tensor dr({n});
                        for (int j = 0; j < n; ++j) dr[static_cast<size_t>(j)] = g.at(static_cast<int>(i), j);
                        t.accumulate(in_id, dr);
                    }
                });
}

Value Tape::reshape(Value a, std::vector<int> shape) {
    const Tensor& ta = value(a);
    if (shape_numel(shape) != ta.numel()) {
        throw ShapeError("reshape: cannot view " + ta.shape_str() + " as " +
                         shape_to_string(shape));
    }
    Tensor out(shape, ta.raw());
    std::vector<int> orig = ta.shape();
    return push("reshape", {a.id}, std::move(out),
                [a, orig = std::move(orig)](Tape& t, const Tensor& g) {
                    t.accumulate(a.id, Tensor(orig, g.raw()));
                });
}

Value Tape::sum_all(Value a) {
    const Tensor& ta = value(a);
    double s = 0.0;
    const size_t n = static_cast<size_t>(ta.numel());
    for (size_t i = 0; i < n; ++i) s += ta[i];
    return push("sum_all", {a.id}, Tensor::scalar(s), [a](Tape& t, const Tensor& g) {
        Tensor da(t.value(a).shape());
        const size_t n = static_cast<size_t>(da.numel());
        for (size_t i = 0; i < n; ++i) da[i] = g[0];
        t.accumulate(a.id, da);
    });
}

}  // namespace cbert
