#include "ctrkd/graph.hpp"

#include <algorithm>
#include <cmath>

#include "ctrkd/kernels.hpp"

namespace ctrkd {

Tape::Ref Tape::alloc(Tensor val) {
  Node n;
  n.grad = Tensor(val.shape);
  n.val = std::move(val);
  nodes_.push_back(std::move(n));
  return &nodes_.back();
}

Tape::Ref Tape::param(ParamStore& store, const std::string& name) {
  auto& e = store.entry(name);
  Ref r = alloc(e.value);
  param_leaves_.push_back({r, &e});
  return r;
}

Tape::Ref Tape::constant(Tensor t) { return alloc(std::move(t)); }
Tape::Ref Tape::input(Tensor t) { return alloc(std::move(t)); }

Tape::Ref Tape::add(Ref a, Ref b) {
  require(a->val.same_shape(b->val), "add: shape mismatch " +
                                         shape_str(a->val.shape) + " vs " +
                                         shape_str(b->val.shape));
  Tensor out(a->val.shape);
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i)
    out.values[i] = a->val.values[i] + b->val.values[i];
  Ref r = alloc(std::move(out));
  steps_.push_back([a, b, r, n] {
    for (int64_t i = 0; i < n; ++i) {
      a->grad.values[i] += r->grad.values[i];
      b->grad.values[i] += r->grad.values[i];
    }
  });
  return r;
}

Tape::Ref Tape::sub(Ref a, Ref b) {
  require(a->val.same_shape(b->val), "sub: shape mismatch " +
                                         shape_str(a->val.shape) + " vs " +
                                         shape_str(b->val.shape));
  Tensor out(a->val.shape);
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i)
    out.values[i] = a->val.values[i] - b->val.values[i];
  Ref r = alloc(std::move(out));
  steps_.push_back([a, b, r, n] {
    for (int64_t i = 0; i < n; ++i) {
      a->grad.values[i] += r->grad.values[i];
      b->grad.values[i] -= r->grad.values[i];
    }
  });
  return r;
}

Tape::Ref Tape::mul(Ref a, Ref b) {
  require(a->val.same_shape(b->val), "mul: shape mismatch " +
                                         shape_str(a->val.shape) + " vs " +
                                         shape_str(b->val.shape));
  Tensor out(a->val.shape);
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i)
    out.values[i] = a->val.values[i] * b->val.values[i];
  Ref r = alloc(std::move(out));
  steps_.push_back([a, b, r, n] {
    for (int64_t i = 0; i < n; ++i) {
      a->grad.values[i] += r->grad.values[i] * b->val.values[i];
      b->grad.values[i] += r->grad.values[i] * a->val.values[i];
    }
  });
  return r;
}

Tape::Ref Tape::relu(Ref x) {
  Tensor out(x->val.shape);
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i)
    out.values[i] = x->val.values[i] > 0.0 ? x->val.values[i] : 0.0;
  Ref r = alloc(std::move(out));
  steps_.push_back([x, r, n] {
    for (int64_t i = 0; i < n; ++i)
      if (x->val.values[i] > 0.0) x->grad.values[i] += r->grad.values[i];
  });
  return r;
}

Tape::Ref Tape::sigmoid(Ref x) {
  Tensor out(x->val.shape);
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i)
    out.values[i] = 1.0 / (1.0 + std::exp(-x->val.values[i]));
  Ref r = alloc(std::move(out));
  steps_.push_back([x, r, n] {
    for (int64_t i = 0; i < n; ++i) {
      const double s = r->val.values[i];
      x->grad.values[i] += r->grad.values[i] * s * (1.0 - s);
    }
  });
  return r;
}

Tape::Ref Tape::scale(Ref x, double c) {
  Tensor out(x->val.shape);
  const int64_t n = out.numel();
  for (int64_t i = 0; i < n; ++i) out.values[i] = c * x->val.values[i];
  Ref r = alloc(std::move(out));
  steps_.push_back([x, r, n, c] {
    for (int64_t i = 0; i < n; ++i) x->grad.values[i] += c * r->grad.values[i];
  });
  return r;
}

Tape::Ref Tape::reshape(Ref x, std::vector<int64_t> shape) {
  require(Tensor::numel_of(shape) == x->val.numel(),
          "reshape: element count mismatch");
  Tensor out(std::move(shape), x->val.values);
  Ref r = alloc(std::move(out));
  const int64_t n = x->val.numel();
  steps_.push_back([x, r, n] {
    for (int64_t i = 0; i < n; ++i) x->grad.values[i] += r->grad.values[i];
  });
  return r;
}

Tape::Ref Tape::concat_cols(const std::vector<Ref>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const int64_t rows = parts[0]->val.rows();
  int64_t total = 0;
  for (Ref p : parts) {
    require(p->val.rows() == rows, "concat_cols: row count mismatch");
    total += p->val.cols();
  }
  Tensor out({rows, total});
  int64_t off = 0;
  for (Ref p : parts) {
    const int64_t c = p->val.cols();
    for (int64_t i = 0; i < rows; ++i)
      for (int64_t j = 0; j < c; ++j) out.at(i, off + j) = p->val.at(i, j);
    off += c;
  }
  Ref r = alloc(std::move(out));
  std::vector<Ref> ps = parts;
  steps_.push_back([ps, r, rows] {
    int64_t off = 0;
    for (Ref p : ps) {
      const int64_t c = p->val.cols();
      for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < c; ++j) p->grad.at(i, j) += r->grad.at(i, off + j);
      off += c;
    }
  });
  return r;
}

Tape::Ref Tape::detach(Ref x) { return alloc(x->val); }

Tape::Ref Tape::matmul(Ref x, Ref w) {
  require(x->val.cols() == w->val.rows(),
          "matmul: inner dims differ " + shape_str(x->val.shape) + " vs " +
              shape_str(w->val.shape));
  const int64_t m = x->val.rows(), k = x->val.cols(), n = w->val.cols();
  Tensor out({m, n});
  kernels::matmul(x->val.data(), w->val.data(), out.data(), m, k, n);
  Ref r = alloc(std::move(out));
  steps_.push_back([x, w, r, m, k, n] {
    kernels::matmul_a_bt_acc(r->grad.data(), w->val.data(), x->grad.data(), m, k, n);
    kernels::matmul_at_b_acc(x->val.data(), r->grad.data(), w->grad.data(), m, k, n);
  });
  return r;
}

Tape::Ref Tape::add_row_broadcast(Ref x, Ref b) {
  require(b->val.numel() == x->val.cols(),
          "add_row_broadcast: bias length " + shape_str(b->val.shape) +
              " vs cols of " + shape_str(x->val.shape));
  const int64_t m = x->val.rows(), n = x->val.cols();
  Tensor out(x->val.shape);
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < n; ++j)
      out.at(i, j) = x->val.at(i, j) + b->val.values[static_cast<size_t>(j)];
  Ref r = alloc(std::move(out));
  steps_.push_back([x, b, r, m, n] {
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) {
        x->grad.at(i, j) += r->grad.at(i, j);
        b->grad.values[static_cast<size_t>(j)] += r->grad.at(i, j);
      }
  });
  return r;
}

Tape::Ref Tape::dense(Ref x, Ref w, Ref b) {
  return add_row_broadcast(matmul(x, w), b);
}

Tape::Ref Tape::row_scale(Ref x, Ref s) {
  require(s->val.rows() == x->val.rows() && s->val.cols() == 1,
          "row_scale: scale must be [rows,1]");
  const int64_t m = x->val.rows(), n = x->val.cols();
  Tensor out(x->val.shape);
  for (int64_t i = 0; i < m; ++i) {
    const double sv = s->val.at(i, 0);
    for (int64_t j = 0; j < n; ++j) out.at(i, j) = sv * x->val.at(i, j);
  }
  Ref r = alloc(std::move(out));
  steps_.push_back([x, s, r, m, n] {
    for (int64_t i = 0; i < m; ++i) {
      const double sv = s->val.at(i, 0);
      double acc = 0.0;
      for (int64_t j = 0; j < n; ++j) {
        x->grad.at(i, j) += sv * r->grad.at(i, j);
        acc += x->val.at(i, j) * r->grad.at(i, j);
      }
      s->grad.at(i, 0) += acc;
    }
  });
  return r;
}

Tape::Ref Tape::gather_rows(Ref table, std::vector<int64_t> idx) {
  const int64_t vocab = table->val.rows(), d = table->val.cols();
  for (int64_t i : idx)
    require(i >= 0 && i < vocab, "gather_rows: index " + std::to_string(i) +
                                     " out of range for vocab " +
                                     std::to_string(vocab));
  const int64_t m = static_cast<int64_t>(idx.size());
  Tensor out({m, d});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t j = 0; j < d; ++j) out.at(i, j) = table->val.at(idx[i], j);
  Ref r = alloc(std::move(out));
  steps_.push_back([table, r, idx = std::move(idx), d] {
    for (size_t i = 0; i < idx.size(); ++i)
      for (int64_t j = 0; j < d; ++j)
        table->grad.at(idx[i], j) += r->grad.at(static_cast<int64_t>(i), j);
  });
  return r;
}

Tape::Ref Tape::tile_rows(Ref x, int64_t reps) {
  require(reps >= 1, "tile_rows: reps must be >= 1");
  const int64_t m = x->val.rows(), d = x->val.cols();
  Tensor out({m * reps, d});
  for (int64_t i = 0; i < m; ++i)
    for (int64_t rr = 0; rr < reps; ++rr)
      for (int64_t j = 0; j < d; ++j) out.at(i * reps + rr, j) = x->val.at(i, j);
  Ref r = alloc(std::move(out));
  steps_.push_back([x, r, m, d, reps] {
    for (int64_t i = 0; i < m; ++i)
      for (int64_t rr = 0; rr < reps; ++rr)
        for (int64_t j = 0; j < d; ++j)
          x->grad.at(i, j) += r->grad.at(i * reps + rr, j);
  });
  return r;
}

Tape::Ref Tape::masked_softmax_rows(Ref scores, std::vector<int64_t> lens) {
  const int64_t b = scores->val.rows(), l = scores->val.cols();
  require(static_cast<int64_t>(lens.size()) == b,
          "masked_softmax_rows: lens size mismatch");
  Tensor out({b, l});
  for (int64_t i = 0; i < b; ++i) {
    const int64_t len = lens[static_cast<size_t>(i)];
    require(len >= 0 && len <= l, "masked_softmax_rows: bad length " +
                                      std::to_string(len) + " for L=" +
                                      std::to_string(l));
    if (len == 0) continue;
    double mx = scores->val.at(i, 0);
    for (int64_t j = 1; j < len; ++j) mx = std::max(mx, scores->val.at(i, j));
    double z = 0.0;
    for (int64_t j = 0; j < len; ++j) {
      out.at(i, j) = std::exp(scores->val.at(i, j) - mx);
      z += out.at(i, j);
    }
    for (int64_t j = 0; j < len; ++j) out.at(i, j) /= z;
  }
  Ref r = alloc(std::move(out));
  steps_.push_back([scores, r, lens = std::move(lens), b] {
    for (int64_t i = 0; i < b; ++i) {
      const int64_t len = lens[static_cast<size_t>(i)];
      if (len == 0) continue;
      double dot = 0.0;
      for (int64_t j = 0; j < len; ++j)
        dot += r->grad.at(i, j) * r->val.at(i, j);
      for (int64_t j = 0; j < len; ++j)
        scores->grad.at(i, j) += r->val.at(i, j) * (r->grad.at(i, j) - dot);
    }
  });
  return r;
}

Tape::Ref Tape::masked_sigmoid_rows(Ref scores, std::vector<int64_t> lens) {
  const int64_t b = scores->val.rows(), l = scores->val.cols();
  require(static_cast<int64_t>(lens.size()) == b,
          "masked_sigmoid_rows: lens size mismatch");
  Tensor out({b, l});
  for (int64_t i = 0; i < b; ++i) {
    const int64_t len = lens[static_cast<size_t>(i)];
    require(len >= 0 && len <= l, "masked_sigmoid_rows: bad length");
    for (int64_t j = 0; j < len; ++j)
      out.at(i, j) = 1.0 / (1.0 + std::exp(-scores->val.at(i, j)));
  }
  Ref r = alloc(std::move(out));
  steps_.push_back([scores, r, lens = std::move(lens), b] {
    for (int64_t i = 0; i < b; ++i) {
      const int64_t len = lens[static_cast<size_t>(i)];
      for (int64_t j = 0; j < len; ++j) {
        const double s = r->val.at(i, j);
        scores->grad.at(i, j) += r->grad.at(i, j) * s * (1.0 - s);
      }
    }
  });
  return r;
}

Tape::Ref Tape::seq_weighted_sum(Ref weights, Ref items) {
  const int64_t b = weights->val.rows(), l = weights->val.cols();
  const int64_t d = items->val.cols();
  require(items->val.rows() == b * l,
          "seq_weighted_sum: items rows " + std::to_string(items->val.rows()) +
              " != B*L " + std::to_string(b * l));
  Tensor out({b, d});
  for (int64_t i = 0; i < b; ++i)
    for (int64_t j = 0; j < l; ++j) {
      const double w = weights->val.at(i, j);
      if (w == 0.0) continue;
      for (int64_t c = 0; c < d; ++c)
        out.at(i, c) += w * items->val.at(i * l + j, c);
    }
  Ref r = alloc(std::move(out));
  steps_.push_back([weights, items, r, b, l, d] {
    for (int64_t i = 0; i < b; ++i)
      for (int64_t j = 0; j < l; ++j) {
        const double w = weights->val.at(i, j);
        double acc = 0.0;
        for (int64_t c = 0; c < d; ++c) {
          items->grad.at(i * l + j, c) += w * r->grad.at(i, c);
          acc += items->val.at(i * l + j, c) * r->grad.at(i, c);
        }
        weights->grad.at(i, j) += acc;
      }
  });
  return r;
}

namespace {
inline double clamp_prob(double p) {
  return std::clamp(p, Tape::kProbClamp, 1.0 - Tape::kProbClamp);
}
inline bool clamped(double p) {
  return p < Tape::kProbClamp || p > 1.0 - Tape::kProbClamp;
}
}  // namespace

Tape::Ref Tape::bce_mean(Ref p, std::vector<double> targets) {
  const int64_t n = p->val.numel();
  require(static_cast<int64_t>(targets.size()) == n,
          "bce_mean: target count mismatch");
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double pc = clamp_prob(p->val.values[i]);
    const double y = targets[static_cast<size_t>(i)];
    acc += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
  }
  Tensor out({1});
  out.values[0] = acc / static_cast<double>(n);
  Ref r = alloc(std::move(out));
  steps_.push_back([p, r, targets = std::move(targets), n] {
    const double g = r->grad.values[0] / static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i) {
      const double pv = p->val.values[i];
      if (clamped(pv)) continue;
      const double y = targets[static_cast<size_t>(i)];
      p->grad.values[i] += g * (-(y / pv) + (1.0 - y) / (1.0 - pv));
    }
  });
  return r;
}

Tape::Ref Tape::bce_mean_soft(Ref p, Ref target) {
  require(p->val.same_shape(target->val), "bce_mean_soft: shape mismatch");
  const int64_t n = p->val.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double pc = clamp_prob(p->val.values[i]);
    const double t = target->val.values[i];
    acc += -(t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc));
  }
  Tensor out({1});
  out.values[0] = acc / static_cast<double>(n);
  Ref r = alloc(std::move(out));
  steps_.push_back([p, target, r, n] {
    const double g = r->grad.values[0] / static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i) {
      const double pv = p->val.values[i];
      const double pc = clamp_prob(pv);
      const double t = target->val.values[i];
      if (!clamped(pv))
        p->grad.values[i] += g * (-(t / pv) + (1.0 - t) / (1.0 - pv));
      target->grad.values[i] += g * (-std::log(pc) + std::log(1.0 - pc));
    }
  });
  return r;
}

Tape::Ref Tape::mse_mean(Ref a, Ref b) {
  require(a->val.same_shape(b->val), "mse_mean: shape mismatch " +
                                         shape_str(a->val.shape) + " vs " +
                                         shape_str(b->val.shape));
  const int64_t n = a->val.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = a->val.values[i] - b->val.values[i];
    acc += d * d;
  }
  Tensor out({1});
  out.values[0] = acc / static_cast<double>(n);
  Ref r = alloc(std::move(out));
  steps_.push_back([a, b, r, n] {
    const double g = 2.0 * r->grad.values[0] / static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i) {
      const double d = a->val.values[i] - b->val.values[i];
      a->grad.values[i] += g * d;
      b->grad.values[i] -= g * d;
    }
  });
  return r;
}

Tape::Ref Tape::sum(Ref x) {
  Tensor out({1});
  for (double v : x->val.values) out.values[0] += v;
  Ref r = alloc(std::move(out));
  const int64_t n = x->val.numel();
  steps_.push_back([x, r, n] {
    for (int64_t i = 0; i < n; ++i) x->grad.values[i] += r->grad.values[0];
  });
  return r;
}

void Tape::backward(Ref loss) {
  require(loss->val.numel() == 1,
          "backward: loss must be scalar, got " + shape_str(loss->val.shape));
  loss->grad.values[0] = 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  for (auto& leaf : param_leaves_) {
    double* dst = leaf.entry->grad.data();
    const double* src = leaf.node->grad.data();
    const int64_t n = leaf.entry->grad.numel();
    for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
  }
}

double grad_check(const std::function<double(bool with_grad)>& eval,
                  ParamStore& store, double eps) {
  require(eps > 0.0, "grad_check: eps must be positive");
  store.zero_grads();
  eval(true);
  // Snapshot analytic gradients before the finite-difference probes.
  std::map<std::string, Tensor> analytic;
  for (auto& [name, e] : store) analytic.emplace(name, e.grad);
  double max_err = 0.0;
  for (auto& [name, e] : store) {
    const Tensor& g = analytic.at(name);
    for (int64_t i = 0; i < e.value.numel(); ++i) {
      const double saved = e.value.values[i];
      e.value.values[i] = saved + eps;
      const double up = eval(false);
      e.value.values[i] = saved - eps;
      const double dn = eval(false);
      e.value.values[i] = saved;
      const double numeric = (up - dn) / (2.0 * eps);
      const double a = g.values[i];
      const double err =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      max_err = std::max(max_err, err);
    }
  }
  store.zero_grads();
  return max_err;
}

}  // namespace ctrkd
