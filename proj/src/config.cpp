#include "dgcn/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dgcn/errors.hpp"

namespace dgcn {
namespace {

std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& want) {
  throw ContractError("config: key '" + key + "' expects " + want + ", got '" + value + "'");
}

int to_int(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    int v = std::stoi(value, &used);
    if (used != value.size()) bad_value(key, value, "an integer");
    return v;
  } catch (const ContractError&) {
    throw;
  } catch (...) {
    bad_value(key, value, "an integer");
  }
}

long to_long(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    long v = std::stol(value, &used);
    if (used != value.size()) bad_value(key, value, "an integer");
    return v;
  } catch (const ContractError&) {
    throw;
  } catch (...) {
    bad_value(key, value, "an integer");
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value, "a number");
    return v;
  } catch (const ContractError&) {
    throw;
  } catch (...) {
    bad_value(key, value, "a number");
  }
}

bool to_switch(const std::string& key, const std::string& value) {
  if (value == "on") return true;
  if (value == "off") return false;
  bad_value(key, value, "on|off");
}

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const std::string* KeyValues::find(const std::string& key) const {
  for (const auto& [k, v] : items)
    if (k == key) return &v;
  return nullptr;
}

KeyValues parse_key_values(const std::string& text, const std::string& what) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError(what + ": expected 'key = value'", lineno);
    std::string key = strip(line.substr(0, eq));
    std::string value = strip(line.substr(eq + 1));
    if (key.empty()) throw ParseError(what + ": empty key", lineno);
    if (value.empty()) throw ParseError(what + ": empty value for key '" + key + "'", lineno);
    if (kv.has(key)) throw ParseError(what + ": duplicate key '" + key + "'", lineno);
    kv.items.push_back({key, value});
  }
  return kv;
}

KeyValues parse_key_values_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ParseError("cannot open " + path, 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_key_values(buf.str(), path);
}

ParsedConfig parse_run_config(const KeyValues& kv) {
  ParsedConfig out;
  ModelConfig& m = out.model;

  // switches folded in after the plain keys so key order never matters
  bool dilation_off = false, stochastic_off = false;

  for (const auto& [key, value] : kv.items) {
    if (key == "backbone") {
      m.backbone = backbone_from_name(value);
    } else if (key == "aggregator") {
      m.aggregator = aggregator_from_name(value);
    } else if (key == "depth") {
      m.depth = to_int(key, value);
    } else if (key == "width") {
      m.width = to_int(key, value);
    } else if (key == "k") {
      m.k = to_int(key, value);
    } else if (key == "dmax" || key == "d-max") {
      m.d_max = to_int(key, value);
    } else if (key == "dilation") {
      dilation_off = !to_switch(key, value);
    } else if (key == "stochastic") {
      stochastic_off = !to_switch(key, value);
    } else if (key == "epsilon") {
      m.epsilon = to_double(key, value);
    } else if (key == "dynamic") {
      m.dynamic_edges = to_switch(key, value);
    } else if (key == "dropout") {
      m.dropout = to_double(key, value);
    } else if (key == "fusion-width") {
      m.fusion_width = to_int(key, value);
    } else if (key == "pred-width1") {
      m.pred_width1 = to_int(key, value);
    } else if (key == "pred-width2") {
      m.pred_width2 = to_int(key, value);
    } else if (key == "num-classes") {
      m.num_classes = to_int(key, value);
    } else if (key == "aux-dim") {
      m.input_aux_dim = to_int(key, value);
    } else if (key == "lr") {
      out.run.adam.base_lr = to_double(key, value);
    } else if (key == "decay-steps") {
      out.run.adam.decay_interval = to_long(key, value);
    } else if (key == "decay-factor") {
      out.run.adam.decay_factor = to_double(key, value);
    } else if (key == "batch-size") {
      out.run.batch_size = to_int(key, value);
    } else {
      throw ContractError("config: unknown key '" + key + "'");
    }
  }

  for (const char* req : {"backbone", "depth", "width", "k"}) {
    if (!kv.has(req))
      throw ContractError(std::string("config: missing required key '") + req + "'");
  }

  if (dilation_off) m.d_max = 1;
  if (stochastic_off) m.epsilon = 0.0;

  require(out.run.batch_size >= 1, "config: batch-size must be >= 1");
  require(out.run.adam.base_lr >= 0.0, "config: lr must be >= 0");
  require(out.run.adam.decay_interval >= 1, "config: decay-steps must be >= 1");
  require(out.run.adam.decay_factor > 0.0, "config: decay-factor must be > 0");
  return out;
}

std::string model_config_text(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "backbone = " << backbone_name(cfg.backbone) << "\n";
  os << "aggregator = " << aggregator_name(cfg.aggregator) << "\n";
  os << "depth = " << cfg.depth << "\n";
  os << "width = " << cfg.width << "\n";
  os << "k = " << cfg.k << "\n";
  os << "dmax = " << cfg.d_max << "\n";
  os << "epsilon = " << g17(cfg.epsilon) << "\n";
  os << "dynamic = " << (cfg.dynamic_edges ? "on" : "off") << "\n";
  os << "dropout = " << g17(cfg.dropout) << "\n";
  os << "fusion-width = " << cfg.fusion_width << "\n";
  os << "pred-width1 = " << cfg.pred_width1 << "\n";
  os << "pred-width2 = " << cfg.pred_width2 << "\n";
  os << "num-classes = " << cfg.num_classes << "\n";
  os << "aux-dim = " << cfg.input_aux_dim << "\n";
  return os.str();
}

ModelConfig parse_model_config_text(const std::string& text, const std::string& what) {
  KeyValues kv = parse_key_values(text, what);
  ModelConfig cfg = parse_run_config(kv).model;
  cfg.validate();
  return cfg;
}

}  // namespace dgcn
