#include <cmath>
#include <set>

#include "dgcn/checks.hpp"
#include "dgcn/model.hpp"
#include "dgcn/ops.hpp"
#include "doctest.h"

using namespace dgcn;

namespace {

PointCloud random_cloud(size_t n, unsigned long long seed, int aux_dim = 0) {
  Rng rng(seed);
  PointCloud cloud;
  cloud.coords = Tensor({n, 3});
  for (auto& v : cloud.coords.data) v = uniform01(rng);
  cloud.aux = Tensor({n, static_cast<size_t>(aux_dim)});
  for (auto& v : cloud.aux.data) v = uniform01(rng);
  cloud.labels.assign(n, 0);
  for (auto& l : cloud.labels) l = static_cast<int>(uniform_index(rng, 3));
  return cloud;
}

ModelConfig small_cfg() {
  ModelConfig cfg;
  cfg.depth = 3;
  cfg.width = 6;
  cfg.k = 4;
  cfg.d_max = 4;
  cfg.epsilon = 0.0;
  cfg.dropout = 0.0;
  cfg.num_classes = 3;
  cfg.fusion_width = 10;
  cfg.pred_width1 = 8;
  cfg.pred_width2 = 7;
  return cfg;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("dilation schedule grows linearly and saturates") {
  CHECK(dilation_schedule(0, 16) == 1);
  CHECK(dilation_schedule(1, 16) == 2);
  CHECK(dilation_schedule(2, 16) == 3);
  CHECK(dilation_schedule(5, 4) == 4);
  CHECK(dilation_schedule(27, 16) == 16);
  CHECK(dilation_schedule(3, 1) == 1);  // dilation off
  CHECK_THROWS_AS(dilation_schedule(-1, 4), ContractError);
}

TEST_CASE("backbone names round-trip") {
  for (auto kind : {BackboneKind::plain, BackboneKind::residual, BackboneKind::dense})
    CHECK(backbone_from_name(backbone_name(kind)) == kind);
  CHECK_THROWS_AS(backbone_from_name("resnet"), ContractError);
}

TEST_CASE("config validation rejects nonsense") {
  ModelConfig cfg = small_cfg();
  cfg.depth = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = small_cfg();
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = small_cfg();
  cfg.num_classes = 0;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg = small_cfg();
  cfg.epsilon = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ContractError);
}

TEST_CASE("trace widths follow the backbone") {
  PointCloud cloud = random_cloud(20, 71);
  Rng fwd(3);

  for (auto backbone : {BackboneKind::plain, BackboneKind::residual}) {
    ModelConfig cfg = small_cfg();
    cfg.backbone = backbone;
    Rng rng(11);
    ModelParams params = init_params(cfg, rng);
    Tape t;
    ForwardTrace trace = backbone_forward(t, cloud, cfg, params, Mode::eval, fwd);
    REQUIRE(trace.layer_features.size() == 3);
    for (const Var& v : trace.layer_features) CHECK(v.value().dim(1) == 6);
  }

  ModelConfig cfg = small_cfg();
  cfg.backbone = BackboneKind::dense;
  Rng rng(11);
  ModelParams params = init_params(cfg, rng);
  Tape t;
  ForwardTrace trace = backbone_forward(t, cloud, cfg, params, Mode::eval, fwd);
  REQUIRE(trace.layer_features.size() == 3);
  CHECK(trace.layer_features[0].value().dim(1) == 9);  // 3 + D: stem keeps its input
  CHECK(trace.layer_features[1].value().dim(1) == 6);  // later entries: new channels only
  CHECK(trace.layer_features[2].value().dim(1) == 6);
}

TEST_CASE("dense width law: running feature width is D0 + D*(l+1)") {
  for (int d0_aux : {0, 6}) {
    for (int width : {8, 32}) {
      for (int depth = 1; depth <= 6; ++depth) {
        ModelConfig cfg = small_cfg();
        cfg.backbone = BackboneKind::dense;
        cfg.depth = depth;
        cfg.width = width;
        cfg.input_aux_dim = d0_aux;
        Rng rng(5);
        ModelParams params = init_params(cfg, rng);
        PointCloud cloud = random_cloud(12, 100 + depth, d0_aux);
        Tape t;
        Rng fwd(7);
        ForwardTrace trace = backbone_forward(t, cloud, cfg, params, Mode::eval, fwd);
        size_t total = 0;
        for (const Var& v : trace.layer_features) total += v.value().dim(1);
        // the concatenation fusion sees = what a dense stack accumulates
        CHECK(total == static_cast<size_t>(3 + d0_aux + width * depth));
      }
    }
  }
}

TEST_CASE("parameter parity: plain and residual have identical counts") {
  for (int depth : {7, 14, 28}) {
    ModelConfig cfg = small_cfg();
    cfg.depth = depth;
    cfg.width = 16;
    cfg.backbone = BackboneKind::plain;
    Rng r1(1), r2(1);
    ModelParams plain = init_params(cfg, r1);
    cfg.backbone = BackboneKind::residual;
    ModelParams res = init_params(cfg, r2);
    CHECK(param_count(plain) == param_count(res));
    CHECK(param_count(plain) > 0);
  }
}

TEST_CASE("residual backbone with zeroed branches is the identity cascade") {
  ModelConfig cfg = small_cfg();
  cfg.backbone = BackboneKind::residual;
  cfg.depth = 5;
  Rng rng(9);
  ModelParams params = init_params(cfg, rng);
  // zero every non-stem conv so each residual layer contributes beta == 0
  for (size_t l = 0; l < params.layers.size(); ++l) {
    LayerParams& lp = params.layers[l];
    for (auto* t : {&lp.unit.w, &lp.unit.b, &lp.unit.bn.beta})
      for (auto& v : t->data) v = 0.0;
  }
  PointCloud cloud = random_cloud(16, 33);
  Tape t;
  Rng fwd(2);
  ForwardTrace trace = backbone_forward(t, cloud, cfg, params, Mode::eval, fwd);
  const Tensor& first = trace.layer_features[0].value();
  for (size_t l = 1; l < trace.layer_features.size(); ++l) {
    const Tensor& cur = trace.layer_features[l].value();
    REQUIRE(cur.same_shape(first));
    for (size_t i = 0; i < cur.numel(); ++i) CHECK(cur.data[i] == first.data[i]);
  }
}

TEST_CASE("plain vs residual: same seed, residual output = plain chain plus skips") {
  // with identical init draws, depth-2 residual output - layer2(plain path) == layer1 output
  ModelConfig cfg = small_cfg();
  cfg.depth = 2;
  Rng r1(21), r2(21);
  cfg.backbone = BackboneKind::plain;
  ModelParams plain = init_params(cfg, r1);
  cfg.backbone = BackboneKind::residual;
  ModelParams res = init_params(cfg, r2);

  PointCloud cloud = random_cloud(14, 55);
  Tape tp, tr;
  Rng f1(4), f2(4);
  cfg.backbone = BackboneKind::plain;
  ForwardTrace a = backbone_forward(tp, cloud, cfg, plain, Mode::eval, f1);
  cfg.backbone = BackboneKind::residual;
  ForwardTrace b = backbone_forward(tr, cloud, cfg, res, Mode::eval, f2);

  const Tensor& plain_out = a.layer_features[1].value();
  const Tensor& res_out = b.layer_features[1].value();
  const Tensor& stem_out = a.layer_features[0].value();
  REQUIRE(plain_out.same_shape(res_out));
  for (size_t i = 0; i < res_out.numel(); ++i)
    CHECK(res_out.data[i] == doctest::Approx(plain_out.data[i] + stem_out.data[i]).epsilon(1e-12));
}

TEST_CASE("fusion with one vertex: the global vector is that vertex's unit output") {
  ModelConfig cfg = small_cfg();
  Rng rng(13);
  ModelParams params = init_params(cfg, rng);
  const size_t total_w = params.fusion.in_dim();

  Tensor x({1, total_w});
  Rng fill(8);
  for (auto& v : x.data) v = uniform01(fill);

  Tape t;
  Var local = t.input(x);
  Var fused = fusion_forward({local}, params, Mode::eval);
  Tape t2;
  Var z = mlp_unit(t2.input(x), params.fusion, Activation::relu, Mode::eval);

  REQUIRE(fused.value().dim(1) == total_w + static_cast<size_t>(cfg.fusion_width));
  for (size_t c = 0; c < total_w; ++c) CHECK(fused.value().at(0, c) == x.at(0, c));
  for (int c = 0; c < cfg.fusion_width; ++c)
    CHECK(fused.value().at(0, total_w + c) == z.value().at(0, c));
}

TEST_CASE("fusion global vector ignores vertex duplication and order") {
  ModelConfig cfg = small_cfg();
  Rng rng(13);
  ModelParams params = init_params(cfg, rng);
  const size_t total_w = 18;  // depth * width = 3 * 6
  REQUIRE(params.fusion.in_dim() == total_w);

  Rng fill(8);
  Tensor base({5, total_w});
  for (auto& v : base.data) v = uniform01(fill);

  auto global_of = [&](const Tensor& feats) {
    Tape t;
    Var local = t.input(feats);
    Var fused = fusion_forward({local}, params, Mode::eval);
    // columns beyond the local width hold the broadcast global vector; row 0 is enough
    std::vector<double> g;
    for (size_t c = total_w; c < fused.value().dim(1); ++c) g.push_back(fused.value().at(0, c));
    return g;
  };

  std::vector<double> g0 = global_of(base);
  CHECK(g0.size() == static_cast<size_t>(cfg.fusion_width));

  // duplicate a vertex
  Tensor dup({6, total_w});
  for (size_t c = 0; c < total_w; ++c) {
    for (size_t r = 0; r < 5; ++r) dup.at(r, c) = base.at(r, c);
    dup.at(5, c) = base.at(2, c);
  }
  // permute vertices
  Tensor perm({5, total_w});
  const size_t order[5] = {4, 2, 0, 1, 3};
  for (size_t r = 0; r < 5; ++r)
    for (size_t c = 0; c < total_w; ++c) perm.at(r, c) = base.at(order[r], c);

  std::vector<double> g1 = global_of(dup);
  std::vector<double> g2 = global_of(perm);
  for (size_t i = 0; i < g0.size(); ++i) {
    CHECK(g0[i] == g1[i]);
    CHECK(g0[i] == g2[i]);
  }
}

TEST_CASE("fused width = trace width + fusion width, logits width = classes") {
  for (auto backbone : {BackboneKind::plain, BackboneKind::residual, BackboneKind::dense}) {
    ModelConfig cfg = small_cfg();
    cfg.backbone = backbone;
    Rng rng(17);
    ModelParams params = init_params(cfg, rng);
    PointCloud cloud = random_cloud(15, 44);
    Tape t;
    Rng fwd(6);
    ForwardTrace trace = model_forward(t, cloud, cfg, params, Mode::eval, fwd);
    const size_t local_w = backbone == BackboneKind::dense ? 3 + 6 * 3 : 6 * 3;
    CHECK(trace.fused.value().dim(1) == local_w + 10);
    CHECK(trace.logits.value().dim(0) == 15);
    CHECK(trace.logits.value().dim(1) == 3);
    CHECK(trace.logits.value().all_finite());
  }
}

TEST_CASE("eval forward is deterministic and ignores the rng") {
  ModelConfig cfg = small_cfg();
  cfg.epsilon = 0.7;  // would randomize train-mode graphs
  cfg.dropout = 0.4;
  Rng rng(19);
  ModelParams params = init_params(cfg, rng);
  PointCloud cloud = random_cloud(18, 77);

  Tape t1, t2;
  Rng f1(1), f2(999);
  ForwardTrace a = model_forward(t1, cloud, cfg, params, Mode::eval, f1);
  ForwardTrace b = model_forward(t2, cloud, cfg, params, Mode::eval, f2);
  REQUIRE(a.logits.value().same_shape(b.logits.value()));
  for (size_t i = 0; i < a.logits.value().numel(); ++i)
    CHECK(a.logits.value().data[i] == b.logits.value().data[i]);
}

TEST_CASE("train mode with epsilon=0 and dropout=0 matches a rerun bitwise") {
  ModelConfig cfg = small_cfg();
  Rng rng(23);
  ModelParams p1 = init_params(cfg, rng);
  Rng rng2(23);
  ModelParams p2 = init_params(cfg, rng2);
  PointCloud cloud = random_cloud(18, 78);

  Tape t1, t2;
  Rng f1(5), f2(5);
  ForwardTrace a = model_forward(t1, cloud, cfg, p1, Mode::train, f1);
  ForwardTrace b = model_forward(t2, cloud, cfg, p2, Mode::train, f2);
  for (size_t i = 0; i < a.logits.value().numel(); ++i)
    CHECK(a.logits.value().data[i] == b.logits.value().data[i]);
}

TEST_CASE("vertex permutation permutes eval logits identically") {
  ModelConfig cfg = small_cfg();
  cfg.epsilon = 0.0;
  cfg.dropout = 0.0;
  Rng rng(29);
  ModelParams params = init_params(cfg, rng);

  // random cloud: distinct pairwise distances hold with probability 1
  PointCloud cloud = random_cloud(13, 91);
  const size_t n = cloud.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = (i * 5 + 3) % n;  // 5 coprime with 13
  std::set<size_t> uniq(order.begin(), order.end());
  REQUIRE(uniq.size() == n);

  PointCloud shuffled;
  shuffled.coords = Tensor({n, 3});
  shuffled.aux = Tensor({n, 0});
  shuffled.labels.assign(n, 0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t c = 0; c < 3; ++c) shuffled.coords.at(i, c) = cloud.coords.at(order[i], c);
    shuffled.labels[i] = cloud.labels[order[i]];
  }

  Tape t1, t2;
  Rng f1(0), f2(0);
  ForwardTrace a = model_forward(t1, cloud, cfg, params, Mode::eval, f1);
  ForwardTrace b = model_forward(t2, shuffled, cfg, params, Mode::eval, f2);
  for (size_t i = 0; i < n; ++i)
    for (size_t c = 0; c < 3; ++c)
      CHECK(b.logits.value().at(i, c) ==
            doctest::Approx(a.logits.value().at(order[i], c)).epsilon(1e-12));
}

TEST_CASE("static edges reuse the layer-0 graph; dynamic edges can differ") {
  // two clusters whose memberships flip after the stem flips feature sign
  ModelConfig cfg = small_cfg();
  cfg.dynamic_edges = false;
  Rng rng(31);
  ModelParams params = init_params(cfg, rng);
  PointCloud cloud = random_cloud(16, 101);

  Tape t1;
  Rng f1(0);
  ForwardTrace a = model_forward(t1, cloud, cfg, params, Mode::eval, f1);
  Tape t2;
  Rng f2(0);
  ForwardTrace b = model_forward(t2, cloud, cfg, params, Mode::eval, f2);
  for (size_t i = 0; i < a.logits.value().numel(); ++i)
    CHECK(a.logits.value().data[i] == b.logits.value().data[i]);  // static is deterministic too

  // dynamic mode on the same cloud must also be a pure function in eval mode,
  // but generally produces different logits than the static graph
  cfg.dynamic_edges = true;
  Tape t3;
  Rng f3(0);
  ForwardTrace c = model_forward(t3, cloud, cfg, params, Mode::eval, f3);
  bool any_diff = false;
  for (size_t i = 0; i < a.logits.value().numel(); ++i)
    any_diff = any_diff || a.logits.value().data[i] != c.logits.value().data[i];
  CHECK(any_diff);
}

TEST_CASE("gradients reach every head unit and the stem") {
  ModelConfig cfg = small_cfg();
  cfg.dropout = 0.0;
  cfg.epsilon = 0.0;
  Rng rng(37);
  ModelParams params = init_params(cfg, rng);
  PointCloud cloud = random_cloud(12, 111);
  cloud.labels = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2};

  Tape t;
  Rng fwd(1);
  ForwardTrace trace = model_forward(t, cloud, cfg, params, Mode::train, fwd);
  Var loss = softmax_cross_entropy(trace.logits, cloud.labels);
  t.backward(loss);

  auto grad_mag = [](const Tensor& t2) {
    double s = 0.0;
    for (double g : t2.grad) s += std::fabs(g);
    return s;
  };
  CHECK(params.stem.unit.w.grad.size() == params.stem.unit.w.data.size());
  CHECK(grad_mag(params.stem.unit.w) > 0.0);
  CHECK(grad_mag(params.fusion.w) > 0.0);
  CHECK(grad_mag(params.pred1.w) > 0.0);
  CHECK(grad_mag(params.pred2.w) > 0.0);
  CHECK(grad_mag(params.pred3.w) > 0.0);
  for (auto& lp : params.layers) CHECK(grad_mag(lp.unit.w) > 0.0);
}

TEST_CASE("model loss gradient passes finite differences") {
  ModelConfig cfg = small_cfg();
  cfg.depth = 2;
  cfg.width = 4;
  cfg.k = 3;
  cfg.dropout = 0.0;
  cfg.epsilon = 0.0;
  cfg.fusion_width = 5;
  cfg.pred_width1 = 5;
  cfg.pred_width2 = 4;
  Rng rng(41);
  ModelParams params = init_params(cfg, rng);
  PointCloud cloud = random_cloud(8, 121);
  cloud.labels = {0, 1, 2, 0, 1, 2, 0, 1};

  // spot-check a few representative tensors end to end through the whole model
  std::vector<Tensor*> probes = {&params.stem.unit.w, &params.layers[0].unit.b,
                                 &params.fusion.bn.gamma, &params.pred3.w};
  double rel = fd_max_rel(probes, [&](Tape& t) {
    Rng fwd(3);
    ForwardTrace trace = model_forward(t, cloud, cfg, params, Mode::train, fwd);
    return softmax_cross_entropy(trace.logits, cloud.labels);
  });
  CHECK(rel < 1e-4);
}

TEST_CASE("visited parameter names are unique and stable") {
  ModelConfig cfg = small_cfg();
  cfg.aggregator = AggregatorKind::graphsage;
  Rng rng(43);
  ModelParams params = init_params(cfg, rng);

  std::vector<std::string> names;
  visit_params(params, [&](const std::string& n, Tensor&) { names.push_back(n); });
  std::set<std::string> uniq(names.begin(), names.end());
  CHECK(uniq.size() == names.size());
  CHECK(uniq.count("stem.unit.w") == 1);
  CHECK(uniq.count("layer2.inner.b") == 1);
  CHECK(uniq.count("fusion.bn.gamma") == 1);
  CHECK(uniq.count("pred3.w") == 1);

  std::vector<std::string> buffers;
  visit_bn_buffers(params, [&](const std::string& n, std::vector<double>&) {
    buffers.push_back(n);
  });
  std::set<std::string> buniq(buffers.begin(), buffers.end());
  CHECK(buniq.size() == buffers.size());
  CHECK(buniq.count("stem.unit.bn.running_mean") == 1);
  CHECK(buniq.count("pred2.bn.running_var") == 1);

  // gin exposes its epsilon as a learnable
  cfg.aggregator = AggregatorKind::gin;
  Rng rng2(43);
  ModelParams gin = init_params(cfg, rng2);
  bool saw_eps = false;
  visit_params(gin, [&](const std::string& n, Tensor&) { saw_eps |= n == "stem.gin_eps"; });
  CHECK(saw_eps);
}

TEST_CASE("too-few points or wrong aux width are rejected") {
  ModelConfig cfg = small_cfg();
  Rng rng(47);
  ModelParams params = init_params(cfg, rng);

  PointCloud one;
  one.coords = Tensor({1, 3});
  one.aux = Tensor({1, 0});
  one.labels = {0};
  Tape t;
  Rng fwd(0);
  CHECK_THROWS_AS(model_forward(t, one, cfg, params, Mode::eval, fwd), ContractError);

  PointCloud wrong = random_cloud(8, 131, 2);  // cfg expects aux dim 0
  Tape t2;
  CHECK_THROWS_AS(model_forward(t2, wrong, cfg, params, Mode::eval, fwd), ContractError);
}

TEST_CASE("every aggregator drives the full model") {
  for (auto kind : {AggregatorKind::edgeconv, AggregatorKind::mrgcn, AggregatorKind::graphsage,
                    AggregatorKind::graphsage_normalized, AggregatorKind::gin}) {
    ModelConfig cfg = small_cfg();
    cfg.aggregator = kind;
    Rng rng(53);
    ModelParams params = init_params(cfg, rng);
    PointCloud cloud = random_cloud(14, 141);
    Tape t;
    Rng fwd(2);
    ForwardTrace trace = model_forward(t, cloud, cfg, params, Mode::train, fwd);
    CHECK(trace.logits.value().all_finite());
    Var loss = softmax_cross_entropy(trace.logits, cloud.labels);
    t.backward(loss);
    CHECK(params.stem.unit.w.grad.size() == params.stem.unit.w.data.size());
  }
}

}  // TEST_SUITE
