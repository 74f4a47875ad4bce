#include "dgcn/checks.hpp"

#include <algorithm>
#include <cmath>

#include "dgcn/errors.hpp"
#include "dgcn/ops.hpp"

namespace dgcn {

namespace {

Tensor rand_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = lo + (hi - lo) * uniform01(rng);
  return t;
}

NeighborList rand_neighbors(std::size_t n, std::size_t k, Rng& rng) {
  NeighborList nl;
  nl.k = k;
  nl.indices.resize(n * k);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t s = 0; s < k; ++s) {
      std::size_t u = uniform_index(rng, n - 1);
      if (u >= v) ++u;  // skip self
      nl.indices[v * k + s] = static_cast<std::int32_t>(u);
    }
  return nl;
}

std::vector<Tensor*> layer_tensors(LayerParams& p) {
  std::vector<Tensor*> out{&p.unit.w, &p.unit.b, &p.unit.bn.gamma, &p.unit.bn.beta};
  if (p.kind == AggregatorKind::graphsage || p.kind == AggregatorKind::graphsage_normalized) {
    out.push_back(&p.inner.w);
    out.push_back(&p.inner.b);
    out.push_back(&p.inner.bn.gamma);
    out.push_back(&p.inner.bn.beta);
  }
  if (p.kind == AggregatorKind::gin) out.push_back(&p.gin_eps);
  return out;
}

// ---- loop reference pieces (no tape, no shared kernels) ----

// rows*dout column-major-free affine + batch stats + optional relu, matching
// the production operation's summation order.
std::vector<double> loop_mlp_unit(const std::vector<double>& x, std::size_t rows,
                                  const MlpUnitParams& p, bool relu_after) {
  const std::size_t din = p.in_dim(), dout = p.out_dim();
  std::vector<double> y(rows * dout);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < dout; ++c) {
      double acc = p.b.data[c];
      for (std::size_t d = 0; d < din; ++d) acc += x[r * din + d] * p.w.data[d * dout + c];
      y[r * dout + c] = acc;
    }
  }
  for (std::size_t c = 0; c < dout; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t r = 0; r < rows; ++r) mean += y[r * dout + c];
    mean /= static_cast<double>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = y[r * dout + c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(rows);
    const double s = std::sqrt(var + p.bn.eps);
    const double inv = s > 0.0 ? 1.0 / s : 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      double v = p.bn.gamma.data[c] * (y[r * dout + c] - mean) * inv + p.bn.beta.data[c];
      if (relu_after && v < 0.0) v = 0.0;
      y[r * dout + c] = v;
    }
  }
  return y;
}

}  // namespace

double fd_max_rel(const std::vector<Tensor*>& params,
                  const std::function<Var(Tape&)>& build_out, double h) {
  Tensor rw, rb;
  {
    Tape probe;
    Var out0 = build_out(probe);
    const std::size_t c = probe.value(out0).channels();
    Rng wrng(mix_seed(9901, c + 131 * probe.value(out0).numel()));
    rw = rand_tensor({c, 1}, wrng);
    rb = rand_tensor({1}, wrng);
  }
  auto loss_of = [&](Tape& t) { return sum_all(affine(build_out(t), t.input(rw), t.input(rb))); };

  for (Tensor* p : params) p->zero_grad();
  std::vector<std::vector<double>> analytic;
  {
    Tape t;
    t.backward(loss_of(t));
    for (Tensor* p : params) analytic.push_back(p->grad);
  }

  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    for (std::size_t j = 0; j < p.numel(); ++j) {
      const double orig = p.data[j];
      double lp, lm;
      {
        Tape t;
        p.data[j] = orig + h;
        lp = t.value(loss_of(t)).data[0];
      }
      {
        Tape t;
        p.data[j] = orig - h;
        lm = t.value(loss_of(t)).data[0];
      }
      p.data[j] = orig;
      const double fd = (lp - lm) / (2.0 * h);
      const double a = analytic[i][j];
      worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-2}));
    }
  }
  return worst;
}

Tensor oracle_layer_forward(const Tensor& h, const NeighborList& nbrs, const LayerParams& p) {
  const std::size_t n = h.dim(0), din = h.dim(1), k = nbrs.k;
  const std::size_t dout = p.out_dim();
  Tensor out({n, dout});

  switch (p.kind) {
    case AggregatorKind::edgeconv: {
      std::vector<double> z(n * k * 2 * din);
      for (std::size_t v = 0; v < n; ++v)
        for (std::size_t s = 0; s < k; ++s) {
          const auto u = static_cast<std::size_t>(nbrs.at(v, s));
          double* row = z.data() + (v * k + s) * 2 * din;
          for (std::size_t c = 0; c < din; ++c) {
            row[c] = h.at(v, c);
            row[din + c] = h.at(u, c) - h.at(v, c);
          }
        }
      const std::vector<double> e = loop_mlp_unit(z, n * k, p.unit, true);
      for (std::size_t v = 0; v < n; ++v)
        for (std::size_t c = 0; c < dout; ++c) {
          double m = e[(v * k) * dout + c];
          for (std::size_t s = 1; s < k; ++s)
            m = std::max(m, e[(v * k + s) * dout + c]);
          out.at(v, c) = m;
        }
      return out;
    }
    case AggregatorKind::mrgcn: {
      std::vector<double> z(n * 2 * din);
      for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t c = 0; c < din; ++c) {
          double m = h.at(static_cast<std::size_t>(nbrs.at(v, 0)), c) - h.at(v, c);
          for (std::size_t s = 1; s < k; ++s)
            m = std::max(m, h.at(static_cast<std::size_t>(nbrs.at(v, s)), c) - h.at(v, c));
          z[v * 2 * din + c] = h.at(v, c);
          z[v * 2 * din + din + c] = m;
        }
      }
      const std::vector<double> y = loop_mlp_unit(z, n, p.unit, true);
      std::copy(y.begin(), y.end(), out.data.begin());
      return out;
    }
    case AggregatorKind::graphsage:
    case AggregatorKind::graphsage_normalized: {
      std::vector<double> nb(n * k * din);
      for (std::size_t v = 0; v < n; ++v)
        for (std::size_t s = 0; s < k; ++s)
          for (std::size_t c = 0; c < din; ++c)
            nb[(v * k + s) * din + c] = h.at(static_cast<std::size_t>(nbrs.at(v, s)), c);
      const std::vector<double> e = loop_mlp_unit(nb, n * k, p.inner, true);
      std::vector<double> z(n * (din + dout));
      for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t c = 0; c < din; ++c) z[v * (din + dout) + c] = h.at(v, c);
        for (std::size_t c = 0; c < dout; ++c) {
          double m = e[(v * k) * dout + c];
          for (std::size_t s = 1; s < k; ++s)
            m = std::max(m, e[(v * k + s) * dout + c]);
          z[v * (din + dout) + din + c] = m;
        }
      }
      std::vector<double> y = loop_mlp_unit(z, n, p.unit, true);
      if (p.kind == AggregatorKind::graphsage_normalized) {
        for (std::size_t v = 0; v < n; ++v) {
          double sq = 0.0;
          for (std::size_t c = 0; c < dout; ++c) sq += y[v * dout + c] * y[v * dout + c];
          const double nrm = std::sqrt(sq);
          if (nrm >= 1e-12)
            for (std::size_t c = 0; c < dout; ++c) y[v * dout + c] /= nrm;
        }
      }
      std::copy(y.begin(), y.end(), out.data.begin());
      return out;
    }
    case AggregatorKind::gin: {
      const double e = 1.0 + p.gin_eps.data[0];
      std::vector<double> z(n * din);
      for (std::size_t v = 0; v < n; ++v)
        for (std::size_t c = 0; c < din; ++c) {
          double sum = 0.0;
          for (std::size_t s = 0; s < k; ++s)
            sum += h.at(static_cast<std::size_t>(nbrs.at(v, s)), c);
          z[v * din + c] = e * h.at(v, c) + sum;
        }
      const std::vector<double> y = loop_mlp_unit(z, n, p.unit, true);
      std::copy(y.begin(), y.end(), out.data.begin());
      return out;
    }
  }
  throw ContractError("unknown aggregator kind");
}

std::vector<std::int32_t> oracle_sorted_neighbors(const Tensor& features, std::size_t m) {
  const std::size_t n = features.dim(0), d = features.dim(1);
  std::vector<std::int32_t> out(n * m);
  std::vector<std::pair<double, std::int32_t>> all;
  for (std::size_t v = 0; v < n; ++v) {
    all.clear();
    for (std::size_t u = 0; u < n; ++u) {
      if (u == v) continue;
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = features.at(v, c) - features.at(u, c);
        acc += diff * diff;
      }
      all.emplace_back(acc, static_cast<std::int32_t>(u));
    }
    std::sort(all.begin(), all.end());
    for (std::size_t s = 0; s < m; ++s) out[v * m + s] = all[s].second;
  }
  return out;
}

std::vector<CheckResult> check_gradients(unsigned long long seed) {
  std::vector<CheckResult> results;
  auto record = [&](const std::string& name, double err, double tol) {
    results.push_back({name, err, tol, err < tol});
  };
  const double tol = 1e-4;

  Rng rng(mix_seed(seed, 1));
  {
    Tensor x = rand_tensor({8, 4}, rng), w = rand_tensor({4, 5}, rng), b = rand_tensor({5}, rng);
    record("affine", fd_max_rel({&x, &w, &b}, [&](Tape& t) {
             return affine(t.param(x), t.param(w), t.param(b));
           }),
           tol);
  }
  {
    Tensor x = rand_tensor({6, 4}, rng);
    Tensor gamma = rand_tensor({4}, rng, 0.5, 1.5), beta = rand_tensor({4}, rng);
    BatchNormState bn(4);
    record("batch_norm", fd_max_rel({&x, &gamma, &beta}, [&](Tape& t) {
             return batch_norm(t.param(x), t.param(gamma), t.param(beta), bn, Mode::train);
           }),
           tol);
  }
  {
    Tensor x = rand_tensor({5, 6}, rng, -2.0, 2.0);
    record("relu", fd_max_rel({&x}, [&](Tape& t) { return relu(t.param(x)); }), tol);
  }
  {
    Tensor a = rand_tensor({4, 3}, rng), b = rand_tensor({4, 5}, rng);
    record("concat_features", fd_max_rel({&a, &b}, [&](Tape& t) {
             return concat_features(t.param(a), t.param(b));
           }),
           tol);
  }
  {
    Tensor h = rand_tensor({6, 4}, rng);
    NeighborList nbrs = rand_neighbors(6, 3, rng);
    record("gather/sub/concat/max", fd_max_rel({&h}, [&](Tape& t) {
             Var hv = t.param(h);
             Var nb = gather_neighbors(hv, nbrs.indices, nbrs.k);
             return max_reduce_neighbors(concat_center(hv, sub_center(nb, hv)));
           }),
           tol);
    record("sum_neighbors", fd_max_rel({&h}, [&](Tape& t) {
             return sum_neighbors(gather_neighbors(t.param(h), nbrs.indices, nbrs.k));
           }),
           tol);
  }
  {
    Tensor x = rand_tensor({5, 4}, rng);
    Tensor s = Tensor::scalar(0.3);
    record("scale_by_scalar", fd_max_rel({&x, &s}, [&](Tape& t) {
             return scale_by_scalar(t.param(x), t.param(s), 1.0);
           }),
           tol);
    record("row_l2_normalize",
           fd_max_rel({&x}, [&](Tape& t) { return row_l2_normalize(t.param(x)); }), tol);
    record("global_max+broadcast", fd_max_rel({&x}, [&](Tape& t) {
             Var xv = t.param(x);
             return broadcast_concat_rows(xv, global_max_rows(xv));
           }),
           tol);
  }
  {
    Tensor x = rand_tensor({8, 6}, rng);
    record("dropout", fd_max_rel({&x}, [&](Tape& t) {
             Rng r(mix_seed(seed, 77));
             return dropout(t.param(x), 0.4, Mode::train, r);
           }),
           tol);
  }
  {
    Tensor logits = rand_tensor({6, 5}, rng, -2.0, 2.0);
    std::vector<int> labels(6);
    for (auto& l : labels) l = static_cast<int>(uniform_index(rng, 5));
    record("softmax_cross_entropy", fd_max_rel({&logits}, [&](Tape& t) {
             return softmax_cross_entropy(t.param(logits), labels);
           }),
           tol);
  }

  for (AggregatorKind kind :
       {AggregatorKind::edgeconv, AggregatorKind::mrgcn, AggregatorKind::graphsage,
        AggregatorKind::graphsage_normalized, AggregatorKind::gin}) {
    Rng lrng(mix_seed(seed, 100 + static_cast<unsigned long long>(kind)));
    const std::size_t n = 8, k = 3, din = 5, dout = 4;
    Tensor h = rand_tensor({n, din}, lrng);
    LayerParams p(kind, din, dout, lrng);
    NeighborList nbrs = rand_neighbors(n, k, lrng);
    std::vector<Tensor*> params = layer_tensors(p);
    params.push_back(&h);
    record(aggregator_name(kind) + "_forward", fd_max_rel(params, [&](Tape& t) {
             return layer_forward(t.param(h), nbrs, p, Mode::train);
           }),
           tol);
  }
  {
    Rng crng(mix_seed(seed, 200));
    Tensor x = rand_tensor({8, 4}, crng);
    MlpUnitParams l1(4, 6, crng), l2(6, 5, crng), l3(5, 3, crng);
    std::vector<Tensor*> params{&x,         &l1.w, &l1.b, &l1.bn.gamma, &l1.bn.beta,
                                &l2.w,      &l2.b, &l2.bn.gamma, &l2.bn.beta,
                                &l3.w,      &l3.b, &l3.bn.gamma, &l3.bn.beta};
    record("three_layer_composite", fd_max_rel(params, [&](Tape& t) {
             Var h = mlp_unit(t.param(x), l1, Activation::relu, Mode::train);
             h = mlp_unit(h, l2, Activation::relu, Mode::train);
             return mlp_unit(h, l3, Activation::none, Mode::train);
           }),
           tol);
  }
  return results;
}

std::vector<CheckResult> check_layers(unsigned long long seed) {
  std::vector<CheckResult> results;
  const double tol = 1e-12;
  int instance = 0;
  for (AggregatorKind kind :
       {AggregatorKind::edgeconv, AggregatorKind::mrgcn, AggregatorKind::graphsage,
        AggregatorKind::graphsage_normalized, AggregatorKind::gin}) {
    for (int trial = 0; trial < 4; ++trial, ++instance) {
      Rng rng(mix_seed(seed, 300 + static_cast<unsigned long long>(instance)));
      const std::size_t n = 4 + uniform_index(rng, 13);  // 4..16
      const std::size_t k = 1 + uniform_index(rng, std::min<std::size_t>(4, n - 1));
      const std::size_t din = 2 + uniform_index(rng, 5), dout = 2 + uniform_index(rng, 5);
      Tensor h = rand_tensor({n, din}, rng);
      LayerParams p(kind, din, dout, rng);
      NeighborList nbrs = rand_neighbors(n, k, rng);

      LayerParams run = p;  // keep reference params untouched by running stats
      Tape t;
      const Tensor got = t.value(layer_forward(t.param(h), nbrs, run, Mode::train));
      const Tensor want = oracle_layer_forward(h, nbrs, p);
      double err = 0.0;
      for (std::size_t i = 0; i < got.numel(); ++i)
        err = std::max(err, std::abs(got.data[i] - want.data[i]));
      results.push_back({aggregator_name(kind) + "#" + std::to_string(trial), err, tol,
                         err <= tol});
    }
  }
  return results;
}

std::vector<CheckResult> check_graph(unsigned long long seed) {
  std::vector<CheckResult> results;
  auto record = [&](const std::string& name, double err, double tol) {
    results.push_back({name, err, tol, err <= tol});
  };

  for (int k : {2, 4, 8}) {
    Rng rng(mix_seed(seed, 400 + static_cast<unsigned long long>(k)));
    Tensor f = rand_tensor({200, 8}, rng);
    const NeighborList nl = knn(f, k);
    const std::vector<std::int32_t> oracle =
        oracle_sorted_neighbors(f, static_cast<std::size_t>(k));
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < oracle.size(); ++i)
      if (nl.indices[i] != oracle[i]) ++mismatches;
    record("knn_vs_full_sort_k" + std::to_string(k), static_cast<double>(mismatches), 0.0);
  }
  {
    Rng rng(mix_seed(seed, 410));
    Tensor f = rand_tensor({50, 4}, rng);
    DilationSpec spec;
    spec.d = 3;
    const NeighborList nl = dilated_knn(f, 4, spec);
    const std::vector<std::int32_t> oracle = oracle_sorted_neighbors(f, 12);
    std::size_t mismatches = 0;
    for (std::size_t v = 0; v < 50; ++v)
      for (std::size_t s = 0; s < 4; ++s)
        if (nl.at(v, s) != oracle[v * 12 + s * 3]) ++mismatches;
    record("dilated_rank_selection", static_cast<double>(mismatches), 0.0);
  }
  {
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
      Rng rng(mix_seed(seed, 500 + static_cast<unsigned long long>(trial)));
      const std::size_t n = 8 + uniform_index(rng, 40);
      Tensor f = rand_tensor({n, 3}, rng);
      const int k = 1 + static_cast<int>(uniform_index(rng, 4));
      DilationSpec spec;  // d = 1
      const NeighborList a = dilated_knn(f, k, spec);
      const NeighborList b = knn(f, k);
      if (a.indices != b.indices) ++mismatches;
    }
    record("dilation_one_equals_knn", static_cast<double>(mismatches), 0.0);
  }
  return results;
}

bool all_pass(const std::vector<CheckResult>& results) {
  for (const auto& r : results)
    if (!r.pass) return false;
  return true;
}

}  // namespace dgcn
