#include "dgcn/cli.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "dgcn/checkpoint.hpp"
#include "dgcn/checks.hpp"
#include "dgcn/config.hpp"
#include "dgcn/data.hpp"
#include "dgcn/errors.hpp"
#include "dgcn/trainer.hpp"

namespace dgcn {
namespace {

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  require(out.good(), "cannot write " + path);
  out << text;
  require(out.good(), "write failed for " + path);
}

int aux_dim_of(const Dataset& data) {
  const PointCloud& b = data.blocks.front();
  return b.aux.numel() == 0 ? 0 : static_cast<int>(b.aux.dim(1));
}

// ---- synth ----

struct SynthArgs {
  SynthSpec spec;
  std::string mix = "0.34,0.33,0.33";
  std::string out;
};

int run_synth(SynthArgs& a) {
  std::istringstream ms(a.mix);
  std::string tok;
  std::vector<double> mix;
  while (std::getline(ms, tok, ',')) mix.push_back(std::stod(tok));
  require(mix.size() == 3, "--mix expects three comma-separated proportions");
  for (int i = 0; i < 3; ++i) a.spec.shape_mix[i] = mix[i];

  Dataset ds = synth_dataset(a.spec);
  std::string manifest = save_dataset(ds, a.out);
  std::cout << manifest << "\n";
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string config, data, out, log;
  int epochs = 100;
  unsigned long long seed = 1;
};

int run_train(TrainArgs& a) {
  ParsedConfig pc = parse_run_config(parse_key_values_file(a.config));
  Dataset data = load_dataset(a.data);

  if (pc.model.num_classes != 0 && pc.model.num_classes != data.num_classes)
    throw ContractError("config declares " + std::to_string(pc.model.num_classes) +
                        " classes but dataset has " + std::to_string(data.num_classes));
  pc.model.num_classes = data.num_classes;
  pc.model.input_aux_dim = aux_dim_of(data);
  pc.model.validate();

  Rng init_rng(mix_seed(a.seed, 0x1417u));
  ModelParams params = init_params(pc.model, init_rng);

  TrainSettings ts;
  ts.epochs = a.epochs;
  ts.batch_size = pc.run.batch_size;
  ts.seed = a.seed;
  ts.adam = pc.run.adam;
  TrainResult result = train(pc.model, params, data, ts);

  save_checkpoint(a.out, pc.model, params);
  if (!a.log.empty()) write_file(a.log, epoch_log_csv(result.log));
  std::cout << "final train loss " << g17(result.final_loss) << "\n";
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string ckpt, data, report;
};

int run_eval(EvalArgs& a) {
  ModelConfig cfg = load_checkpoint_config(a.ckpt);
  Dataset data = load_dataset(a.data);
  if (cfg.num_classes != data.num_classes)
    throw ContractError("checkpoint was trained with " + std::to_string(cfg.num_classes) +
                        " classes, dataset has " + std::to_string(data.num_classes));

  Rng rng(0);
  ModelParams params = init_params(cfg, rng);
  load_checkpoint(a.ckpt, params);

  Metrics m = evaluate(cfg, params, data);
  std::cout << "OA " << g17(m.overall_accuracy) << "\n";
  for (int c = 0; c < cfg.num_classes; ++c) {
    std::cout << "IoU[" << c << "] " << g17(m.per_class_iou[c])
              << (m.class_present[c] ? "" : " (absent)") << "\n";
  }
  std::cout << "mIoU " << g17(m.mean_iou) << "\n";

  if (!a.report.empty()) {
    std::ostringstream os;
    os << "metric,value\n";
    for (int c = 0; c < cfg.num_classes; ++c)
      os << "iou_" << c << "," << g17(m.per_class_iou[c]) << "\n";
    os << "oa," << g17(m.overall_accuracy) << "\n";
    os << "miou," << g17(m.mean_iou) << "\n";
    write_file(a.report, os.str());
  }
  return 0;
}

// ---- check ----

int run_check(const std::string& what, unsigned long long seed) {
  std::vector<CheckResult> results;
  auto append = [&](std::vector<CheckResult> batch) {
    results.insert(results.end(), batch.begin(), batch.end());
  };
  if (what == "gradients" || what == "all") append(check_gradients(seed));
  if (what == "knn" || what == "all") append(check_graph(seed));
  if (what == "layers" || what == "all") append(check_layers(seed));

  std::vector<std::string> offenders;
  for (const CheckResult& r : results) {
    std::cout << (r.pass ? "pass" : "FAIL") << "  " << r.name << "  max err " << g17(r.err)
              << " (tol " << g17(r.tol) << ")\n";
    if (!r.pass) offenders.push_back(r.name);
  }
  if (!offenders.empty()) {
    std::cout << "failed:";
    for (const auto& n : offenders) std::cout << " " << n;
    std::cout << "\n";
    return 1;
  }
  return 0;
}

// ---- ablate ----

struct AblateArgs {
  std::string grid, data, out, config, test_data;
  int epochs = 25;
  unsigned long long seed = 1;
};

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

std::vector<GridAxis> parse_grid(const std::string& spec) {
  static const std::vector<std::string> allowed = {"backbone", "depth",    "width",
                                                   "k",        "dilation", "stochastic"};
  std::vector<GridAxis> axes;
  std::istringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ';')) {
    if (part.empty()) continue;
    size_t eq = part.find('=');
    require(eq != std::string::npos, "--grid axis '" + part + "' needs key=v1,v2,...");
    GridAxis axis;
    axis.key = part.substr(0, eq);
    bool ok = false;
    for (const auto& k : allowed) ok = ok || k == axis.key;
    require(ok, "--grid axis '" + axis.key + "' not supported (use backbone, depth, width, k, "
                                             "dilation, stochastic)");
    std::istringstream vs(part.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) {
      require(!v.empty(), "--grid axis '" + axis.key + "' has an empty value");
      axis.values.push_back(v);
    }
    require(!axis.values.empty(), "--grid axis '" + axis.key + "' has no values");
    axes.push_back(axis);
  }
  require(!axes.empty(), "--grid is empty");
  return axes;
}

int worker_slots() {
  const char* env = std::getenv("DGCN_THREADS");
  if (!env) return 1;
  int n = std::atoi(env);
  return n < 1 ? 1 : n;
}

int run_ablate(AblateArgs& a) {
  std::vector<GridAxis> axes = parse_grid(a.grid);
  KeyValues base;
  if (!a.config.empty()) base = parse_key_values_file(a.config);

  // desk-scale fallbacks for whatever neither the config file nor the grid pins
  const std::vector<std::pair<std::string, std::string>> defaults = {
      {"backbone", "residual"}, {"depth", "7"},        {"width", "16"},
      {"k", "8"},               {"fusion-width", "64"}, {"pred-width1", "64"},
      {"pred-width2", "32"}};

  size_t cells = 1;
  for (const auto& ax : axes) cells *= ax.values.size();

  // row-major: later axes vary fastest
  std::vector<KeyValues> cell_kv(cells);
  for (size_t i = 0; i < cells; ++i) {
    KeyValues kv = base;
    size_t rem = i;
    std::vector<std::pair<std::string, std::string>> picks(axes.size());
    for (size_t ax = axes.size(); ax-- > 0;) {
      picks[ax] = {axes[ax].key, axes[ax].values[rem % axes[ax].values.size()]};
      rem /= axes[ax].values.size();
    }
    for (const auto& [k, v] : picks) {
      bool replaced = false;
      for (auto& item : kv.items)
        if (item.first == k) {
          item.second = v;
          replaced = true;
        }
      if (!replaced) kv.items.push_back({k, v});
    }
    for (const auto& [k, v] : defaults)
      if (!kv.has(k)) kv.items.push_back({k, v});
    cell_kv[i] = kv;
  }

  Dataset data = load_dataset(a.data);
  Dataset test = a.test_data.empty() ? data : load_dataset(a.test_data);

  std::vector<std::string> rows(cells);
  std::vector<char> failed(cells, 0);
  std::atomic<size_t> next{0};

  auto run_cell = [&](size_t i) {
    const KeyValues& kv = cell_kv[i];
    std::ostringstream row;
    ParsedConfig pc;
    try {
      pc = parse_run_config(kv);
      pc.model.num_classes = data.num_classes;
      pc.model.input_aux_dim = aux_dim_of(data);
      pc.model.validate();
    } catch (const std::exception& e) {
      // a malformed cell is a usage error for the whole grid
      rows[i] = "";
      failed[i] = 2;
      std::cerr << "cell " << i << ": " << e.what() << "\n";
      return;
    }
    row << backbone_name(pc.model.backbone) << "," << pc.model.depth << "," << pc.model.width
        << "," << pc.model.k << "," << (pc.model.d_max > 1 ? "on" : "off") << ","
        << (pc.model.epsilon > 0 ? "on" : "off") << ",";
    try {
      Rng init_rng(mix_seed(a.seed, 0x1417u));
      ModelParams params = init_params(pc.model, init_rng);
      TrainSettings ts;
      ts.epochs = a.epochs;
      ts.batch_size = pc.run.batch_size;
      ts.seed = a.seed;
      ts.adam = pc.run.adam;
      TrainResult result = train(pc.model, params, data, ts);
      Metrics m = evaluate(pc.model, params, test);
      row << g17(result.final_loss) << "," << g17(m.overall_accuracy) << "," << g17(m.mean_iou);
    } catch (const std::exception& e) {
      row << "failed,failed,failed";
      failed[i] = 1;
      std::cerr << "cell " << i << ": " << e.what() << "\n";
    }
    rows[i] = row.str();
  };

  const size_t slots = std::min(static_cast<size_t>(worker_slots()), cells);
  if (slots <= 1) {
    for (size_t i = 0; i < cells; ++i) run_cell(i);
  } else {
    std::vector<std::thread> pool;
    for (size_t s = 0; s < slots; ++s)
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < cells; i = next.fetch_add(1)) run_cell(i);
      });
    for (auto& th : pool) th.join();
  }

  for (char f : failed)
    if (f == 2) throw ContractError("ablation grid contains an invalid cell configuration");

  std::ostringstream os;
  os << "backbone,depth,width,k,dilation,stochastic,final_loss,oa,miou\n";
  for (const auto& r : rows) os << r << "\n";
  write_file(a.out, os.str());
  std::cout << os.str();

  for (char f : failed)
    if (f) return 1;
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"dynamic graph segmentation trainer"};
  app.require_subcommand(1);

  SynthArgs sy;
  CLI::App* synth = app.add_subcommand("synth", "generate a labeled synthetic dataset");
  synth->add_option("--blocks", sy.spec.num_blocks, "number of blocks")->capture_default_str();
  synth->add_option("--points", sy.spec.points_per_block, "points per block")
      ->capture_default_str();
  synth->add_option("--classes", sy.spec.num_classes, "number of classes")->capture_default_str();
  synth->add_option("--seed", sy.spec.seed, "rng seed")->capture_default_str();
  synth->add_option("--mix", sy.mix, "cluster,plane,bar proportions")->capture_default_str();
  synth->add_option("--noise", sy.spec.noise_sigma, "coordinate noise sigma")
      ->capture_default_str();
  synth->add_option("--split", sy.spec.split, "train|test tag")->capture_default_str();
  synth->add_option("--out", sy.out, "output directory")->required();

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model from a key=value config");
  train_cmd->add_option("--config", tr.config, "config file (backbone, depth, width, k, ...)")
      ->required();
  train_cmd->add_option("--data", tr.data, "dataset manifest")->required();
  train_cmd->add_option("--out", tr.out, "checkpoint path to write")->required();
  train_cmd->add_option("--epochs", tr.epochs, "training epochs")->capture_default_str();
  train_cmd->add_option("--seed", tr.seed, "rng seed")->capture_default_str();
  train_cmd->add_option("--log", tr.log, "per-epoch CSV log path");

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--ckpt", ev.ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--data", ev.data, "dataset manifest")->required();
  eval_cmd->add_option("--report", ev.report, "CSV report path");

  std::string check_what;
  unsigned long long check_seed = 1;
  CLI::App* check_cmd = app.add_subcommand("check", "run built-in numeric self-checks");
  check_cmd->add_option("what", check_what, "gradients|knn|layers|all")
      ->required()
      ->check(CLI::IsMember({"gradients", "knn", "layers", "all"}));
  check_cmd->add_option("--seed", check_seed, "rng seed")->capture_default_str();

  AblateArgs ab;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "train/eval a grid of configs");
  ablate_cmd->add_option("--grid", ab.grid, "e.g. 'backbone=plain,residual;depth=7,14'")
      ->required();
  ablate_cmd->add_option("--data", ab.data, "training dataset manifest")->required();
  ablate_cmd->add_option("--out", ab.out, "CSV output path")->required();
  ablate_cmd->add_option("--config", ab.config, "base config file for unswept keys");
  ablate_cmd->add_option("--test-data", ab.test_data, "held-out manifest for eval columns");
  ablate_cmd->add_option("--epochs", ab.epochs, "epochs per cell")->capture_default_str();
  ablate_cmd->add_option("--seed", ab.seed, "rng seed shared by every cell")
      ->capture_default_str();

  std::vector<const char*> argv;
  argv.push_back("dgcn");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(sy);
    if (train_cmd->parsed()) return run_train(tr);
    if (eval_cmd->parsed()) return run_eval(ev);
    if (check_cmd->parsed()) return run_check(check_what, check_seed);
    if (ablate_cmd->parsed()) return run_ablate(ab);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;  // unreachable with require_subcommand(1)
}

}  // namespace dgcn
