#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dgcn/checks.hpp"
#include "dgcn/cli.hpp"
#include "dgcn/graph.hpp"

namespace py = pybind11;

namespace {

dgcn::Tensor coords_tensor(const std::vector<std::vector<double>>& points) {
  if (points.empty()) throw dgcn::ContractError("need at least one point");
  dgcn::Tensor t({points.size(), points.front().size()});
  for (size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != t.dim(1))
      throw dgcn::ContractError("ragged point list");
    for (size_t j = 0; j < t.dim(1); ++j) t.at(i, j) = points[i][j];
  }
  return t;
}

std::vector<std::vector<int>> neighbor_rows(const dgcn::NeighborList& nbrs) {
  std::vector<std::vector<int>> out(nbrs.size());
  for (size_t v = 0; v < nbrs.size(); ++v) {
    out[v].resize(nbrs.k);
    for (size_t s = 0; s < nbrs.k; ++s) out[v][s] = nbrs.at(v, s);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(dgcn, m) {
  m.doc() = "dynamic graph point cloud segmentation";

  m.def("run", &dgcn::run_cli, py::arg("args"),
        "Run a CLI subcommand in-process; returns the exit code.");

  m.def(
      "knn",
      [](const std::vector<std::vector<double>>& points, int k) {
        return neighbor_rows(dgcn::knn(coords_tensor(points), k));
      },
      py::arg("points"), py::arg("k"),
      "k nearest neighbors per point (self excluded, ties by index).");

  m.def(
      "dilated_knn",
      [](const std::vector<std::vector<double>>& points, int k, int d) {
        dgcn::DilationSpec spec;
        spec.d = d;
        return neighbor_rows(dgcn::dilated_knn(coords_tensor(points), k, spec));
      },
      py::arg("points"), py::arg("k"), py::arg("d"),
      "Every d-th neighbor out of the k*d nearest.");

  m.def(
      "check",
      [](const std::string& what, unsigned long long seed) {
        std::vector<dgcn::CheckResult> results;
        if (what == "gradients" || what == "all") {
          auto r = dgcn::check_gradients(seed);
          results.insert(results.end(), r.begin(), r.end());
        }
        if (what == "knn" || what == "all") {
          auto r = dgcn::check_graph(seed);
          results.insert(results.end(), r.begin(), r.end());
        }
        if (what == "layers" || what == "all") {
          auto r = dgcn::check_layers(seed);
          results.insert(results.end(), r.begin(), r.end());
        }
        if (results.empty()) throw dgcn::ContractError("unknown check '" + what + "'");
        return dgcn::all_pass(results);
      },
      py::arg("what"), py::arg("seed") = 1,
      "Run gradients|knn|layers|all self-checks, True iff all pass.");
}
