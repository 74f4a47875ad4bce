#include "dgcn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dgcn/errors.hpp"
#include "dgcn/rng.hpp"

namespace fs = std::filesystem;

namespace dgcn {
namespace {

// Largest-remainder split of `total` into weighted integer parts.
std::vector<int> apportion(int total, const std::vector<double>& weights) {
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  std::vector<int> out(weights.size(), 0);
  if (wsum <= 0.0 || total <= 0) return out;

  std::vector<std::pair<double, size_t>> rema;  // (-remainder, index) for stable sort
  int assigned = 0;
  for (size_t i = 0; i < weights.size(); ++i) {
    double exact = total * weights[i] / wsum;
    out[i] = static_cast<int>(std::floor(exact));
    assigned += out[i];
    rema.push_back({-(exact - out[i]), i});
  }
  std::sort(rema.begin(), rema.end());
  for (int j = 0; j < total - assigned; ++j) out[rema[j % rema.size()].second]++;
  return out;
}

enum class Shape { cluster, plane, bar };

std::array<double, 3> class_anchor(int c, Rng& rng) {
  // Corners of [0.2, 0.8]^3 keep classes apart; small per-block jitter.
  std::array<double, 3> a;
  for (int j = 0; j < 3; ++j) a[j] = ((c >> j) & 1) ? 0.8 : 0.2;
  a[0] += 0.1 * (c / 8);  // >8 classes: march extra anchors along x
  for (int j = 0; j < 3; ++j) a[j] += 0.1 * (uniform01(rng) - 0.5);
  return a;
}

void emit_point(Shape shape, int c, const std::array<double, 3>& anchor, double noise,
                Rng& rng, double* xyz) {
  const int axis = c % 3;
  switch (shape) {
    case Shape::cluster:
      for (int j = 0; j < 3; ++j) xyz[j] = anchor[j] + 0.04 * normal01(rng);
      break;
    case Shape::plane:
      for (int j = 0; j < 3; ++j) {
        xyz[j] = (j == axis) ? anchor[j] + 0.01 * (uniform01(rng) - 0.5)
                             : anchor[j] + 0.35 * (uniform01(rng) - 0.5);
      }
      break;
    case Shape::bar:
      for (int j = 0; j < 3; ++j) {
        xyz[j] = (j == axis) ? anchor[j] + 0.6 * (uniform01(rng) - 0.5)
                             : anchor[j] + 0.01 * (uniform01(rng) - 0.5);
      }
      break;
  }
  for (int j = 0; j < 3; ++j) xyz[j] += noise * normal01(rng);
}

void validate(const SynthSpec& spec) {
  require(spec.num_blocks >= 1, "synth spec: need at least one block");
  require(spec.num_classes >= 1, "synth spec: need at least one class");
  require(spec.points_per_block >= spec.num_classes,
          "synth spec: points-per-block must cover every class");
  require(spec.noise_sigma >= 0.0, "synth spec: negative noise-sigma");
  double mix_sum = 0.0;
  for (double m : spec.shape_mix) {
    require(m >= 0.0, "synth spec: negative shape-mix entry");
    mix_sum += m;
  }
  require(mix_sum > 0.0, "synth spec: shape-mix sums to zero");
  require(spec.split == "train" || spec.split == "test", "synth spec: split must be train|test");
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Dataset synth_dataset(const SynthSpec& spec) {
  validate(spec);
  const int P = spec.points_per_block;
  const int L = spec.num_classes;

  // Assign classes to shapes by the mix (clusters first), then points to
  // classes in proportion to each class's shape share.
  std::vector<double> mix = {spec.shape_mix[0], spec.shape_mix[1], spec.shape_mix[2]};
  std::vector<int> classes_per_shape = apportion(L, mix);
  std::vector<Shape> shape_of_class(L);
  std::vector<double> class_weight(L);
  {
    int c = 0;
    for (int s = 0; s < 3; ++s) {
      for (int i = 0; i < classes_per_shape[s]; ++i, ++c) {
        shape_of_class[c] = static_cast<Shape>(s);
        class_weight[c] = mix[s] / classes_per_shape[s];
      }
    }
  }

  Dataset ds;
  ds.num_classes = L;
  ds.split = spec.split;

  for (int b = 0; b < spec.num_blocks; ++b) {
    Rng rng(mix_seed(spec.seed, 0x5b10c000ull + b));

    std::vector<int> per_class = apportion(P, class_weight);
    // every class shows up at least once
    for (int c = 0; c < L; ++c) {
      while (per_class[c] == 0) {
        int big = 0;
        for (int j = 1; j < L; ++j)
          if (per_class[j] > per_class[big]) big = j;
        per_class[big]--;
        per_class[c]++;
      }
    }

    std::vector<double> coords;
    coords.reserve(static_cast<size_t>(P) * 3);
    std::vector<int> labels;
    labels.reserve(P);
    for (int c = 0; c < L; ++c) {
      std::array<double, 3> anchor = class_anchor(c, rng);
      for (int i = 0; i < per_class[c]; ++i) {
        double xyz[3];
        emit_point(shape_of_class[c], c, anchor, spec.noise_sigma, rng, xyz);
        coords.insert(coords.end(), xyz, xyz + 3);
        labels.push_back(c);
      }
    }

    std::vector<int> order(P);
    for (int i = 0; i < P; ++i) order[i] = i;
    shuffle_vec(order, rng);

    PointCloud cloud;
    cloud.coords = Tensor({static_cast<size_t>(P), 3});
    cloud.aux = Tensor({static_cast<size_t>(P), 0});
    cloud.labels.resize(P);
    for (int i = 0; i < P; ++i) {
      int src = order[i];
      for (int j = 0; j < 3; ++j) cloud.coords.at(i, j) = coords[static_cast<size_t>(src) * 3 + j];
      cloud.labels[i] = labels[src];
    }
    ds.blocks.push_back(std::move(cloud));
  }
  return ds;
}

void save_point_file(const PointCloud& cloud, int num_classes, const std::string& path) {
  const int n = cloud.size();
  const int c = cloud.aux.numel() == 0 ? 0 : cloud.aux.dim(1);
  require(num_classes >= 1, "point file needs at least one class");
  require(static_cast<int>(cloud.labels.size()) == n, "labels/coords size mismatch");
  for (int lab : cloud.labels)
    require(lab >= 0 && lab < num_classes, "label out of range while saving " + path);

  std::ofstream out(path);
  require(out.good(), "cannot write " + path);
  out << "PCSEG v1 " << n << " " << c << " " << num_classes << "\n";
  for (int i = 0; i < n; ++i) {
    out << format_g17(cloud.coords.at(i, 0)) << " " << format_g17(cloud.coords.at(i, 1)) << " "
        << format_g17(cloud.coords.at(i, 2));
    for (int j = 0; j < c; ++j) out << " " << format_g17(cloud.aux.at(i, j));
    out << " " << cloud.labels[i] << "\n";
  }
  require(out.good(), "write failed for " + path);
}

PointCloud load_point_file(const std::string& path, int* num_classes_out) {
  std::ifstream in(path);
  if (!in.good()) throw ParseError("cannot open " + path, 0);

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing header", 1);
  std::istringstream hs(line);
  std::string magic, version;
  int n = -1, c = -1, num_classes = -1;
  if (!(hs >> magic >> version >> n >> c >> num_classes) || magic != "PCSEG" || version != "v1")
    throw ParseError(path + ": bad header, expected 'PCSEG v1 N C L'", 1);
  std::string extra;
  if (hs >> extra) throw ParseError(path + ": trailing tokens in header", 1);
  if (n < 1 || c < 0 || num_classes < 1)
    throw ParseError(path + ": header counts out of range", 1);

  PointCloud cloud;
  cloud.coords = Tensor({static_cast<size_t>(n), 3});
  cloud.aux = Tensor({static_cast<size_t>(n), static_cast<size_t>(c)});
  cloud.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const int lineno = i + 2;
    if (!std::getline(in, line))
      throw ParseError(path + ": expected " + std::to_string(n) + " rows, file ends early",
                       lineno);
    std::istringstream rs(line);
    for (int j = 0; j < 3; ++j) {
      if (!(rs >> cloud.coords.at(i, j)))
        throw ParseError(path + ": malformed row (need 3 coords + " + std::to_string(c) +
                             " features + label)",
                         lineno);
    }
    for (int j = 0; j < c; ++j) {
      if (!(rs >> cloud.aux.at(i, j)))
        throw ParseError(path + ": malformed row, missing feature " + std::to_string(j + 1),
                         lineno);
    }
    if (!(rs >> cloud.labels[i]))
      throw ParseError(path + ": malformed row, missing label", lineno);
    if (rs >> extra) throw ParseError(path + ": trailing tokens on row", lineno);
    if (cloud.labels[i] < 0 || cloud.labels[i] >= num_classes)
      throw ContractError(path + " line " + std::to_string(lineno) + ": label " +
                          std::to_string(cloud.labels[i]) + " outside [0, " +
                          std::to_string(num_classes) + ")");
  }
  if (num_classes_out) *num_classes_out = num_classes;
  return cloud;
}

std::string save_dataset(const Dataset& ds, const std::string& dir) {
  require(!ds.blocks.empty(), "dataset has no blocks");
  fs::create_directories(dir);
  std::vector<std::string> names;
  for (size_t b = 0; b < ds.blocks.size(); ++b) {
    char name[32];
    std::snprintf(name, sizeof(name), "block_%04zu.pcseg", b);
    save_point_file(ds.blocks[b], ds.num_classes, (fs::path(dir) / name).string());
    names.push_back(name);
  }
  std::string manifest = (fs::path(dir) / "manifest.pcds").string();
  std::ofstream out(manifest);
  require(out.good(), "cannot write " + manifest);
  out << "PCDS v1 " << ds.num_classes << " " << ds.split << "\n";
  for (const auto& name : names) out << name << "\n";
  require(out.good(), "write failed for " + manifest);
  return manifest;
}

Dataset load_dataset(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in.good()) throw ParseError("cannot open " + manifest_path, 0);

  std::string line;
  if (!std::getline(in, line)) throw ParseError(manifest_path + ": missing header", 1);
  std::istringstream hs(line);
  std::string magic, version, split;
  int num_classes = -1;
  if (!(hs >> magic >> version >> num_classes >> split) || magic != "PCDS" || version != "v1")
    throw ParseError(manifest_path + ": bad header, expected 'PCDS v1 num-classes split'", 1);
  if (num_classes < 1) throw ParseError(manifest_path + ": num-classes out of range", 1);
  if (split != "train" && split != "test")
    throw ParseError(manifest_path + ": split must be train|test", 1);

  Dataset ds;
  ds.num_classes = num_classes;
  ds.split = split;
  fs::path base = fs::path(manifest_path).parent_path();
  int lineno = 1;
  while (std::getline(in, line)) {
    lineno++;
    std::istringstream ls(line);
    std::string rel;
    if (!(ls >> rel)) continue;  // blank line
    fs::path p(rel);
    if (p.is_relative()) p = base / p;
    int block_classes = 0;
    PointCloud cloud = load_point_file(p.string(), &block_classes);
    if (block_classes != num_classes)
      throw ContractError(manifest_path + " line " + std::to_string(lineno) + ": block declares " +
                          std::to_string(block_classes) + " classes, manifest says " +
                          std::to_string(num_classes));
    ds.blocks.push_back(std::move(cloud));
  }
  if (ds.blocks.empty()) throw ParseError(manifest_path + ": no block files listed", lineno);
  return ds;
}

}  // namespace dgcn
