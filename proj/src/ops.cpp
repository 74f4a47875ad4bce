#include "dgcn/ops.hpp"

#include <algorithm>
#include <cmath>

namespace dgcn {

namespace {

Tape& tape_of(Var v) {
  require(v.valid(), "invalid tape handle");
  return *v.tape;
}

void check_rows(const Tensor& t, const char* op) {
  if (t.rows() == 0) throw ContractError(std::string(op) + ": empty input");
}

}  // namespace

BatchNormState::BatchNormState(std::size_t channels)
    : gamma(Tensor::full({channels}, 1.0)),
      beta(Tensor::zeros({channels})),
      running_mean(channels, 0.0),
      running_var(channels, 1.0) {}

MlpUnitParams::MlpUnitParams(std::size_t d_in, std::size_t d_out, Rng& rng)
    : w({d_in, d_out}), b(Tensor::zeros({d_out})), bn(d_out) {
  const double scale = std::sqrt(2.0 / static_cast<double>(d_in));
  for (auto& v : w.data) v = scale * normal01(rng);
}

Var affine(Var xv, Var wv, Var bv) {
  Tape& t = tape_of(xv);
  const Tensor& x = t.value(xv);
  const Tensor& w = t.value(wv);
  const Tensor& b = t.value(bv);
  require(w.ndim() == 2, "affine: weight must be 2-D, got " + w.shape_str());
  const std::size_t din = w.dim(0), dout = w.dim(1);
  require(x.channels() == din, "affine: input channels " + x.shape_str() +
                                   " do not match weight " + w.shape_str());
  require(b.numel() == dout, "affine: bias " + b.shape_str() + " does not match weight " +
                                 w.shape_str());
  check_rows(x, "affine");
  const std::size_t rows = x.rows();

  std::vector<std::size_t> oshape = x.shape;
  oshape.back() = dout;
  Tensor y(std::move(oshape));
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data.data() + r * din;
    double* yr = y.data.data() + r * dout;
    for (std::size_t c = 0; c < dout; ++c) yr[c] = b.data[c];
    for (std::size_t d = 0; d < din; ++d) {
      const double xv_ = xr[d];
      const double* wd = w.data.data() + d * dout;
      for (std::size_t c = 0; c < dout; ++c) yr[c] += xv_ * wd[c];
    }
  }

  const int xid = xv.id, wid = wv.id, bid = bv.id;
  return t.emit(std::move(y), {xv, wv, bv}, [=](Tape& tp, const Node& n) {
    const Tensor& x_ = tp.value(xid);
    const Tensor& w_ = tp.value(wid);
    const std::size_t rows_ = x_.rows();
    const std::size_t din_ = w_.dim(0), dout_ = w_.dim(1);
    const std::vector<double>& dy = n.adj;
    if (tp.needs_grad(xid)) {
      std::vector<double>& dx = tp.adj(xid);
      for (std::size_t r = 0; r < rows_; ++r) {
        const double* dyr = dy.data() + r * dout_;
        double* dxr = dx.data() + r * din_;
        for (std::size_t d = 0; d < din_; ++d) {
          const double* wd = w_.data.data() + d * dout_;
          double acc = 0.0;
          for (std::size_t c = 0; c < dout_; ++c) acc += dyr[c] * wd[c];
          dxr[d] += acc;
        }
      }
    }
    if (tp.needs_grad(wid)) {
      std::vector<double>& dw = tp.adj(wid);
      for (std::size_t r = 0; r < rows_; ++r) {
        const double* xr = x_.data.data() + r * din_;
        const double* dyr = dy.data() + r * dout_;
        for (std::size_t d = 0; d < din_; ++d) {
          const double xv_ = xr[d];
          double* dwd = dw.data() + d * dout_;
          for (std::size_t c = 0; c < dout_; ++c) dwd[c] += xv_ * dyr[c];
        }
      }
    }
    if (tp.needs_grad(bid)) {
      std::vector<double>& db = tp.adj(bid);
      for (std::size_t r = 0; r < rows_; ++r) {
        const double* dyr = dy.data() + r * dout_;
        for (std::size_t c = 0; c < dout_; ++c) db[c] += dyr[c];
      }
    }
  });
}

Var batch_norm(Var xv, Var gv, Var bv, BatchNormState& bn, Mode mode) {
  Tape& t = tape_of(xv);
  const Tensor& x = t.value(xv);
  const std::size_t C = x.channels();
  require(t.value(gv).numel() == C && t.value(bv).numel() == C,
          "batch_norm: gamma/beta do not match " + std::to_string(C) + " channels");
  require(bn.channels() == C, "batch_norm: state has " + std::to_string(bn.channels()) +
                                  " channels, input " + x.shape_str());
  check_rows(x, "batch_norm");
  const std::size_t R = x.rows();
  const Tensor& gamma = t.value(gv);
  const Tensor& beta = t.value(bv);

  std::vector<double> mean(C, 0.0), inv_std(C, 0.0);
  if (mode == Mode::train) {
    std::vector<double> var(C, 0.0);
    for (std::size_t r = 0; r < R; ++r) {
      const double* xr = x.data.data() + r * C;
      for (std::size_t c = 0; c < C; ++c) mean[c] += xr[c];
    }
    for (std::size_t c = 0; c < C; ++c) mean[c] /= static_cast<double>(R);
    for (std::size_t r = 0; r < R; ++r) {
      const double* xr = x.data.data() + r * C;
      for (std::size_t c = 0; c < C; ++c) {
        const double d = xr[c] - mean[c];
        var[c] += d * d;
      }
    }
    for (std::size_t c = 0; c < C; ++c) var[c] /= static_cast<double>(R);
    for (std::size_t c = 0; c < C; ++c) {
      const double s = std::sqrt(var[c] + bn.eps);
      inv_std[c] = s > 0.0 ? 1.0 / s : 0.0;  // zero-variance, zero-eps batch
    }
    for (std::size_t c = 0; c < C; ++c) {
      bn.running_mean[c] = bn.momentum * bn.running_mean[c] + (1.0 - bn.momentum) * mean[c];
      bn.running_var[c] = bn.momentum * bn.running_var[c] + (1.0 - bn.momentum) * var[c];
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = bn.running_mean[c];
      const double s = std::sqrt(bn.running_var[c] + bn.eps);
      inv_std[c] = s > 0.0 ? 1.0 / s : 0.0;
    }
  }

  Tensor y(x.shape);
  for (std::size_t r = 0; r < R; ++r) {
    const double* xr = x.data.data() + r * C;
    double* yr = y.data.data() + r * C;
    for (std::size_t c = 0; c < C; ++c)
      yr[c] = gamma.data[c] * (xr[c] - mean[c]) * inv_std[c] + beta.data[c];
  }

  const int xid = xv.id, gid = gv.id, bid = bv.id;
  const bool train = mode == Mode::train;
  return t.emit(std::move(y), {xv, gv, bv},
                [=, mean = std::move(mean), inv_std = std::move(inv_std)](Tape& tp,
                                                                          const Node& n) {
    const Tensor& x_ = tp.value(xid);
    const Tensor& gamma_ = tp.value(gid);
    const std::size_t R_ = x_.rows(), C_ = x_.channels();
    const std::vector<double>& dy = n.adj;

    // Per-channel sums of dy and dy*xhat feed every input adjoint.
    std::vector<double> s1(C_, 0.0), s2(C_, 0.0);
    for (std::size_t r = 0; r < R_; ++r) {
      const double* xr = x_.data.data() + r * C_;
      const double* dyr = dy.data() + r * C_;
      for (std::size_t c = 0; c < C_; ++c) {
        const double xhat = (xr[c] - mean[c]) * inv_std[c];
        s1[c] += dyr[c];
        s2[c] += dyr[c] * xhat;
      }
    }
    if (tp.needs_grad(gid)) {
      std::vector<double>& dg = tp.adj(gid);
      for (std::size_t c = 0; c < C_; ++c) dg[c] += s2[c];
    }
    if (tp.needs_grad(bid)) {
      std::vector<double>& db = tp.adj(bid);
      for (std::size_t c = 0; c < C_; ++c) db[c] += s1[c];
    }
    if (tp.needs_grad(xid)) {
      std::vector<double>& dx = tp.adj(xid);
      const double invR = 1.0 / static_cast<double>(R_);
      for (std::size_t r = 0; r < R_; ++r) {
        const double* xr = x_.data.data() + r * C_;
        const double* dyr = dy.data() + r * C_;
        double* dxr = dx.data() + r * C_;
        for (std::size_t c = 0; c < C_; ++c) {
          const double scale = gamma_.data[c] * inv_std[c];
          if (train) {
            const double xhat = (xr[c] - mean[c]) * inv_std[c];
            dxr[c] += scale * (dyr[c] - s1[c] * invR - xhat * s2[c] * invR);
          } else {
            dxr[c] += scale * dyr[c];
          }
        }
      }
    }
  });
}

Var relu(Var xv) {
  Tape& t = tape_of(xv);
  const Tensor& x = t.value(xv);
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
  const int xid = xv.id;
  return t.emit(std::move(y), {xv}, [=](Tape& tp, const Node& n) {
    if (!tp.needs_grad(xid)) return;
    const Tensor& x_ = tp.value(xid);
    std::vector<double>& dx = tp.adj(xid);
    for (std::size_t i = 0; i < x_.numel(); ++i)
      if (x_.data[i] > 0.0) dx[i] += n.adj[i];  // subgradient 0 at exactly 0
  });
}

Var concat_features(Var av, Var bv) {
  Tape& t = tape_of(av);
  const Tensor& a = t.value(av);
  const Tensor& b = t.value(bv);
  require(a.ndim() == 2 && b.ndim() == 2, "concat_features: inputs must be 2-D");
  require(a.dim(0) == b.dim(0), "concat_features: row mismatch " + a.shape_str() + " vs " +
                                    b.shape_str());
  const std::size_t N = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  Tensor y({N, ca + cb});
  for (std::size_t r = 0; r < N; ++r) {
    double* yr = y.data.data() + r * (ca + cb);
    std::copy_n(a.data.data() + r * ca, ca, yr);
    std::copy_n(b.data.data() + r * cb, cb, yr + ca);
  }
  const int aid = av.id, bid = bv.id;
  return t.emit(std::move(y), {av, bv}, [=](Tape& tp, const Node& n) {
    const std::size_t stride = ca + cb;
    if (tp.needs_grad(aid)) {
      std::vector<double>& da = tp.adj(aid);
      for (std::size_t r = 0; r < N; ++r)
        for (std::size_t c = 0; c < ca; ++c) da[r * ca + c] += n.adj[r * stride + c];
    }
    if (tp.needs_grad(bid)) {
      std::vector<double>& db = tp.adj(bid);
      for (std::size_t r = 0; r < N; ++r)
        for (std::size_t c = 0; c < cb; ++c) db[r * cb + c] += n.adj[r * stride + ca + c];
    }
  });
}

Var concat_many(const std::vector<Var>& xs) {
  require(!xs.empty(), "concat_many: no inputs");
  if (xs.size() == 1) return xs[0];
  Tape& t = tape_of(xs[0]);
  const std::size_t N = t.value(xs[0]).dim(0);
  std::size_t total = 0;
  std::vector<std::size_t> widths(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Tensor& xi = t.value(xs[i]);
    require(xi.ndim() == 2 && xi.dim(0) == N, "concat_many: inputs must be 2-D with equal rows");
    widths[i] = xi.dim(1);
    total += widths[i];
  }
  Tensor y({N, total});
  std::size_t off = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Tensor& xi = t.value(xs[i]);
    for (std::size_t r = 0; r < N; ++r)
      std::copy_n(xi.data.data() + r * widths[i], widths[i], y.data.data() + r * total + off);
    off += widths[i];
  }
  std::vector<int> ids(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) ids[i] = xs[i].id;
  return t.emit(std::move(y), xs,
                [=, widths = std::move(widths), ids = std::move(ids)](Tape& tp, const Node& n) {
    std::size_t off_ = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (tp.needs_grad(ids[i])) {
        std::vector<double>& dx = tp.adj(ids[i]);
        for (std::size_t r = 0; r < N; ++r)
          for (std::size_t c = 0; c < widths[i]; ++c)
            dx[r * widths[i] + c] += n.adj[r * total + off_ + c];
      }
      off_ += widths[i];
    }
  });
}

Var gather_neighbors(Var hv, const std::vector<std::int32_t>& indices, std::size_t k) {
  Tape& t = tape_of(hv);
  const Tensor& h = t.value(hv);
  require(h.ndim() == 2, "gather_neighbors: features must be 2-D");
  require(k >= 1, "gather_neighbors: empty neighborhood");
  const std::size_t N = h.dim(0), D = h.dim(1);
  require(indices.size() == N * k, "gather_neighbors: index table size mismatch");
  Tensor y({N, k, D});
  for (std::size_t v = 0; v < N; ++v)
    for (std::size_t s = 0; s < k; ++s) {
      const auto u = static_cast<std::size_t>(indices[v * k + s]);
      require(u < N, "gather_neighbors: neighbor index out of range");
      std::copy_n(h.data.data() + u * D, D, y.data.data() + (v * k + s) * D);
    }
  const int hid = hv.id;
  return t.emit(std::move(y), {hv},
                [=, idx = indices](Tape& tp, const Node& n) {  // own a copy: caller's table may die
    if (!tp.needs_grad(hid)) return;
    std::vector<double>& dh = tp.adj(hid);
    for (std::size_t v = 0; v < N; ++v)
      for (std::size_t s = 0; s < k; ++s) {
        const auto u = static_cast<std::size_t>(idx[v * k + s]);
        const double* src = n.adj.data() + (v * k + s) * D;
        double* dst = dh.data() + u * D;
        for (std::size_t c = 0; c < D; ++c) dst[c] += src[c];
      }
  });
}

Var sub_center(Var nv, Var hv) {
  Tape& t = tape_of(nv);
  const Tensor& nb = t.value(nv);
  const Tensor& h = t.value(hv);
  require(nb.ndim() == 3 && h.ndim() == 2 && nb.dim(0) == h.dim(0) && nb.dim(2) == h.dim(1),
          "sub_center: shapes " + nb.shape_str() + " and " + h.shape_str() + " do not conform");
  const std::size_t N = nb.dim(0), k = nb.dim(1), D = nb.dim(2);
  Tensor y({N, k, D});
  for (std::size_t v = 0; v < N; ++v) {
    const double* hr = h.data.data() + v * D;
    for (std::size_t s = 0; s < k; ++s) {
      const double* nr = nb.data.data() + (v * k + s) * D;
      double* yr = y.data.data() + (v * k + s) * D;
      for (std::size_t c = 0; c < D; ++c) yr[c] = nr[c] - hr[c];
    }
  }
  const int nid = nv.id, hid = hv.id;
  return t.emit(std::move(y), {nv, hv}, [=](Tape& tp, const Node& n) {
    if (tp.needs_grad(nid)) {
      std::vector<double>& dn = tp.adj(nid);
      for (std::size_t i = 0; i < n.adj.size(); ++i) dn[i] += n.adj[i];
    }
    if (tp.needs_grad(hid)) {
      std::vector<double>& dh = tp.adj(hid);
      for (std::size_t v = 0; v < N; ++v) {
        double* dhr = dh.data() + v * D;
        for (std::size_t s = 0; s < k; ++s) {
          const double* ar = n.adj.data() + (v * k + s) * D;
          for (std::size_t c = 0; c < D; ++c) dhr[c] -= ar[c];
        }
      }
    }
  });
}

Var concat_center(Var hv, Var rv) {
  Tape& t = tape_of(hv);
  const Tensor& h = t.value(hv);
  const Tensor& rel = t.value(rv);
  require(h.ndim() == 2 && rel.ndim() == 3 && rel.dim(0) == h.dim(0),
          "concat_center: shapes " + h.shape_str() + " and " + rel.shape_str() +
              " do not conform");
  const std::size_t N = h.dim(0), D = h.dim(1), k = rel.dim(1), Dr = rel.dim(2);
  Tensor y({N, k, D + Dr});
  for (std::size_t v = 0; v < N; ++v)
    for (std::size_t s = 0; s < k; ++s) {
      double* yr = y.data.data() + (v * k + s) * (D + Dr);
      std::copy_n(h.data.data() + v * D, D, yr);
      std::copy_n(rel.data.data() + (v * k + s) * Dr, Dr, yr + D);
    }
  const int hid = hv.id, rid = rv.id;
  return t.emit(std::move(y), {hv, rv}, [=](Tape& tp, const Node& n) {
    const std::size_t stride = D + Dr;
    if (tp.needs_grad(hid)) {
      std::vector<double>& dh = tp.adj(hid);
      for (std::size_t v = 0; v < N; ++v) {
        double* dhr = dh.data() + v * D;
        for (std::size_t s = 0; s < k; ++s) {
          const double* ar = n.adj.data() + (v * k + s) * stride;
          for (std::size_t c = 0; c < D; ++c) dhr[c] += ar[c];
        }
      }
    }
    if (tp.needs_grad(rid)) {
      std::vector<double>& dr = tp.adj(rid);
      for (std::size_t v = 0; v < N; ++v)
        for (std::size_t s = 0; s < k; ++s) {
          const double* ar = n.adj.data() + (v * k + s) * stride + D;
          double* drr = dr.data() + (v * k + s) * Dr;
          for (std::size_t c = 0; c < Dr; ++c) drr[c] += ar[c];
        }
    }
  });
}

Var max_reduce_neighbors(Var xv, std::vector<std::int32_t>* argmax_out) {
  Tape& t = tape_of(xv);
  const Tensor& x = t.value(xv);
  require(x.ndim() == 3, "max_reduce_neighbors: input must be [N,k,D], got " + x.shape_str());
  const std::size_t N = x.dim(0), k = x.dim(1), D = x.dim(2);
  if (k == 0) throw ContractError("max_reduce_neighbors: empty neighborhood");
  Tensor y({N, D});
  std::vector<std::int32_t> arg(N * D, 0);
  for (std::size_t v = 0; v < N; ++v) {
    const double* base = x.data.data() + v * k * D;
    double* yr = y.data.data() + v * D;
    std::copy_n(base, D, yr);
    for (std::size_t s = 1; s < k; ++s) {
      const double* row = base + s * D;
      for (std::size_t c = 0; c < D; ++c)
        if (row[c] > yr[c]) {  // strict: ties keep the lowest slot
          yr[c] = row[c];
          arg[v * D + c] = static_cast<std::int32_t>(s);
        }
    }
  }
  if (argmax_out != nullptr) *argmax_out = arg;
  const int xid = xv.id;
  return t.emit(std::move(y), {xv}, [=, arg = std::move(arg)](Tape& tp, const Node& n) {
    if (!tp.needs_grad(xid)) return;
    std::vector<double>& dx = tp.adj(xid);
    for (std::size_t v = 0; v < N; ++v)
      for (std::size_t c = 0; c < D; ++c) {
        const auto s = static_cast<std::size_t>(arg[v * D + c]);
        dx[(v * k + s) * D + c] += n.adj[v * D + c];
      }
  });
}

Var sum_neighbors(Var xv) {
  Tape& t = tape_of(xv);
  const Tensor& x = t.value(xv);
  require(x.ndim() == 3, "sum_neighbors: input must be [N,k,D], got " + x.shape_str());
  const std::size_t N = x.dim(0), k = x.dim(1), D = x.dim(2);
  if (k == 0) throw ContractError("sum_neighbors: empty neighborhood");
  Tensor y({N, D});
  for (std::size_t v = 0; v < N; ++v) {
    double* yr = y.data.data() + v * D;
    for (std::size_t s = 0; s < k; ++s) {
      const double* row = x.data.data() + (v * k + s) * D;
      for (std::size_t c = 0; c < D; ++c) yr[c] += row[c];
    }
  }
  const int xid = xv.id;
  return t.emit(std::move(y), {xv}, [=](Tape& tp, const Node& n) {
    if (!tp.needs_grad(xid)) return;
    std::vector<double>& dx = tp.adj(xid);
    for (std::size_t v = 0; v < N; ++v)
      for (std::size_t s = 0; s < k; ++s) {
        double* dxr = dx.data() + (v * k + s) * D;
        const double* ar = n.adj.data() + v * D;
        for (std::size_t c = 0; c < D; ++c) dxr[c] += ar[c];
      }
  });
}

Var add(Var av, Var bv) {
  Tape& t = tape_of(av);
  const Tensor& a = t.value(av);
  const Tensor& b = t.value(bv);
  require(a.same_shape(b),
          "add: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  Tensor y(a.shape);
  for (std::size_t i = 0; i < a.numel(); ++i) y.data[i] = a.data[i] + b.data[i];
  const int aid = av.id, bid = bv.id;
  return t.emit(std::move(y), {av, bv}, [=](Tape& tp, const Node& n) {
    if (tp.needs_grad(aid)) {
      std::vector<double>& da = tp.adj(aid);
      for (std::size_t i = 0; i < n.adj.size(); ++i) da[i] += n.adj[i];
    }
    if (tp.needs_grad(bid)) {
      std::vector<double>& db = tp.adj(bid);
      for (std::size_t i = 0; i < n.adj.size(); ++i) db[i] += n.adj[i];
    }
  });
}

Var scale_by_scalar(Var xv, Var sv, double offset) {
  Tape& t = tape_of(xv);
  const Tensor& x = t.value(xv);
  const Tensor& s = t.value(sv);
  require(s.numel() == 1, "scale_by_scalar: scale must be a single element");
  const double f = offset + s.data[0];
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) y.data[i] = f * x.data[i];
  const int xid = xv.id, sid = sv.id;
  return t.emit(std::move(y), {xv, sv}, [=](Tape& tp, const Node& n) {
    const Tensor& x_ = tp.value(xid);
    if (tp.needs_grad(xid)) {
      std::vector<double>& dx = tp.adj(xid);
      for (std::size_t i = 0; i < n.adj.size(); ++i) dx[i] += f * n.adj[i];
    }
    if (tp.needs_grad(sid)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n.adj.size(); ++i) acc += x_.data[i] * n.adj[i];
      tp.adj(sid)[0] += acc;
    }
  });
}

Var row_l2_normalize(Var xv, double min_norm) {
  Tape& t = tape_of(xv);
  const Tensor& x = t.value(xv);
  require(x.ndim() == 2, "row_l2_normalize: input must be 2-D");
  const std::size_t N = x.dim(0), D = x.dim(1);
  Tensor y(x.shape);
  std::vector<double> norms(N, 0.0);
  for (std::size_t v = 0; v < N; ++v) {
    const double* xr = x.data.data() + v * D;
    double sq = 0.0;
    for (std::size_t c = 0; c < D; ++c) sq += xr[c] * xr[c];
    const double nrm = std::sqrt(sq);
    norms[v] = nrm;
    double* yr = y.data.data() + v * D;
    if (nrm < min_norm) {
      std::copy_n(xr, D, yr);  // near-zero rows pass through unnormalized
    } else {
      for (std::size_t c = 0; c < D; ++c) yr[c] = xr[c] / nrm;
    }
  }
  const int xid = xv.id;
  return t.emit(std::move(y), {xv}, [=, norms = std::move(norms)](Tape& tp, const Node& n) {
    if (!tp.needs_grad(xid)) return;
    const Tensor& x_ = tp.value(xid);
    std::vector<double>& dx = tp.adj(xid);
    for (std::size_t v = 0; v < N; ++v) {
      const double* xr = x_.data.data() + v * D;
      const double* ar = n.adj.data() + v * D;
      double* dxr = dx.data() + v * D;
      const double nrm = norms[v];
      if (nrm < min_norm) {
        for (std::size_t c = 0; c < D; ++c) dxr[c] += ar[c];
      } else {
        double dot = 0.0;
        for (std::size_t c = 0; c < D; ++c) dot += xr[c] * ar[c];
        const double inv = 1.0 / nrm, inv3 = inv * inv * inv;
        for (std::size_t c = 0; c < D; ++c) dxr[c] += ar[c] * inv - xr[c] * dot * inv3;
      }
    }
  });
}

Var dropout(Var xv, double rate, Mode mode, Rng& rng) {
  Tape& t = tape_of(xv);
  if (rate < 0.0 || rate >= 1.0)
    throw ContractError("invalid hyperparameter: dropout rate must be in [0,1), got " +
                        std::to_string(rate));
  const Tensor& x = t.value(xv);
  const int xid = xv.id;
  if (mode == Mode::eval || rate == 0.0) {
    Tensor y = x;
    return t.emit(std::move(y), {xv}, [=](Tape& tp, const Node& n) {
      if (!tp.needs_grad(xid)) return;
      std::vector<double>& dx = tp.adj(xid);
      for (std::size_t i = 0; i < n.adj.size(); ++i) dx[i] += n.adj[i];
    });
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = uniform01(rng) < rate ? 0.0 : keep_scale;
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] * mask[i];
  return t.emit(std::move(y), {xv}, [=, mask = std::move(mask)](Tape& tp, const Node& n) {
    if (!tp.needs_grad(xid)) return;
    std::vector<double>& dx = tp.adj(xid);
    for (std::size_t i = 0; i < n.adj.size(); ++i) dx[i] += n.adj[i] * mask[i];
  });
}

Var global_max_rows(Var xv) {
  Tape& t = tape_of(xv);
  const Tensor& x = t.value(xv);
  require(x.ndim() == 2, "global_max_rows: input must be 2-D");
  check_rows(x, "global_max_rows");
  const std::size_t N = x.dim(0), D = x.dim(1);
  Tensor y({1, D});
  std::vector<std::int32_t> arg(D, 0);
  std::copy_n(x.data.data(), D, y.data.data());
  for (std::size_t v = 1; v < N; ++v) {
    const double* xr = x.data.data() + v * D;
    for (std::size_t c = 0; c < D; ++c)
      if (xr[c] > y.data[c]) {
        y.data[c] = xr[c];
        arg[c] = static_cast<std::int32_t>(v);
      }
  }
  const int xid = xv.id;
  return t.emit(std::move(y), {xv}, [=, arg = std::move(arg)](Tape& tp, const Node& n) {
    if (!tp.needs_grad(xid)) return;
    std::vector<double>& dx = tp.adj(xid);
    for (std::size_t c = 0; c < D; ++c)
      dx[static_cast<std::size_t>(arg[c]) * D + c] += n.adj[c];
  });
}

Var broadcast_concat_rows(Var xv, Var gv) {
  Tape& t = tape_of(xv);
  const Tensor& x = t.value(xv);
  const Tensor& g = t.value(gv);
  require(x.ndim() == 2 && g.ndim() == 2 && g.dim(0) == 1,
          "broadcast_concat_rows: expected [N,C1] and [1,C2]");
  const std::size_t N = x.dim(0), c1 = x.dim(1), c2 = g.dim(1);
  Tensor y({N, c1 + c2});
  for (std::size_t v = 0; v < N; ++v) {
    double* yr = y.data.data() + v * (c1 + c2);
    std::copy_n(x.data.data() + v * c1, c1, yr);
    std::copy_n(g.data.data(), c2, yr + c1);
  }
  const int xid = xv.id, gid = gv.id;
  return t.emit(std::move(y), {xv, gv}, [=](Tape& tp, const Node& n) {
    const std::size_t stride = c1 + c2;
    if (tp.needs_grad(xid)) {
      std::vector<double>& dx = tp.adj(xid);
      for (std::size_t v = 0; v < N; ++v)
        for (std::size_t c = 0; c < c1; ++c) dx[v * c1 + c] += n.adj[v * stride + c];
    }
    if (tp.needs_grad(gid)) {
      std::vector<double>& dg = tp.adj(gid);
      for (std::size_t v = 0; v < N; ++v)
        for (std::size_t c = 0; c < c2; ++c) dg[c] += n.adj[v * stride + c1 + c];
    }
  });
}

Var softmax_cross_entropy(Var lv, const std::vector<int>& labels) {
  Tape& t = tape_of(lv);
  const Tensor& logits = t.value(lv);
  require(logits.ndim() == 2, "softmax_cross_entropy: logits must be [N,C]");
  const std::size_t N = logits.dim(0), C = logits.dim(1);
  require(labels.size() == N, "softmax_cross_entropy: " + std::to_string(labels.size()) +
                                  " labels for " + std::to_string(N) + " rows");
  std::vector<double> probs(N * C);
  double loss = 0.0;
  for (std::size_t r = 0; r < N; ++r) {
    const int y = labels[r];
    require(y >= 0 && static_cast<std::size_t>(y) < C,
            "softmax_cross_entropy: label " + std::to_string(y) + " out of range [0," +
                std::to_string(C) + ")");
    const double* lr = logits.data.data() + r * C;
    double m = lr[0];
    for (std::size_t c = 1; c < C; ++c) m = std::max(m, lr[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(lr[c] - m);
    const double logz = std::log(z);
    for (std::size_t c = 0; c < C; ++c) probs[r * C + c] = std::exp(lr[c] - m) / z;
    loss -= (lr[static_cast<std::size_t>(y)] - m - logz);
  }
  loss /= static_cast<double>(N);
  const int lid = lv.id;
  return t.emit(Tensor::scalar(loss), {lv},
                [=, probs = std::move(probs), labels = labels](Tape& tp, const Node& n) {
    if (!tp.needs_grad(lid)) return;
    std::vector<double>& dl = tp.adj(lid);
    const double dy = n.adj[0] / static_cast<double>(N);
    for (std::size_t r = 0; r < N; ++r) {
      const auto y = static_cast<std::size_t>(labels[r]);
      for (std::size_t c = 0; c < C; ++c)
        dl[r * C + c] += dy * (probs[r * C + c] - (c == y ? 1.0 : 0.0));
    }
  });
}

Var sum_all(Var xv) {
  Tape& t = tape_of(xv);
  const Tensor& x = t.value(xv);
  double acc = 0.0;
  for (double v : x.data) acc += v;
  const int xid = xv.id;
  return t.emit(Tensor::scalar(acc), {xv}, [=](Tape& tp, const Node& n) {
    if (!tp.needs_grad(xid)) return;
    std::vector<double>& dx = tp.adj(xid);
    for (auto& v : dx) v += n.adj[0];
  });
}

Var mlp_unit(Var x, Var w, Var b, BatchNormState& bn, Var gamma, Var beta, Activation act,
             Mode mode) {
  check_rows(x.value(), "mlp_unit");
  Var y = affine(x, w, b);
  y = batch_norm(y, gamma, beta, bn, mode);
  return act == Activation::relu ? relu(y) : y;
}

Var mlp_unit(Var x, MlpUnitParams& p, Activation act, Mode mode) {
  Tape& t = tape_of(x);
  return mlp_unit(x, t.param(p.w), t.param(p.b), p.bn, t.param(p.bn.gamma), t.param(p.bn.beta),
                  act, mode);
}

}  // namespace dgcn
