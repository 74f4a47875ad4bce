#include "dgcn/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "dgcn/config.hpp"
#include "dgcn/errors.hpp"

namespace dgcn {
namespace {

struct Record {
  std::vector<size_t> dims;
  std::vector<double> values;
  bool used = false;
};

void write_record(std::ostream& out, const std::string& name, const std::vector<size_t>& dims,
                  const std::vector<double>& values) {
  out << name << "\tdims";
  for (size_t d : dims) out << " " << d;
  out << "\tvalues";
  char buf[64];
  for (double v : values) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << " " << buf;
  }
  out << "\n";
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg, ModelParams& params) {
  size_t count = 0;
  visit_params(params, [&](const std::string&, Tensor&) { count++; });
  visit_bn_buffers(params, [&](const std::string&, std::vector<double>&) { count++; });

  std::ofstream out(path);
  require(out.good(), "cannot write " + path);
  out << "DGKPT v1 " << count << "\n";
  visit_params(params, [&](const std::string& name, Tensor& t) {
    write_record(out, name, t.shape, t.data);
  });
  visit_bn_buffers(params, [&](const std::string& name, std::vector<double>& buf) {
    write_record(out, name, {buf.size()}, buf);
  });
  require(out.good(), "write failed for " + path);

  std::ofstream cfg_out(path + ".cfg");
  require(cfg_out.good(), "cannot write " + path + ".cfg");
  cfg_out << model_config_text(cfg);
  require(cfg_out.good(), "write failed for " + path + ".cfg");
}

void load_checkpoint(const std::string& path, ModelParams& params) {
  std::ifstream in(path);
  if (!in.good()) throw ParseError("cannot open " + path, 0);

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": missing header", 1);
  std::istringstream hs(line);
  std::string magic, version;
  long long declared = -1;
  if (!(hs >> magic >> version >> declared) || magic != "DGKPT" || version != "v1" || declared < 0)
    throw ParseError(path + ": bad header, expected 'DGKPT v1 <count>'", 1);

  std::map<std::string, Record> records;
  int lineno = 1;
  while (std::getline(in, line)) {
    lineno++;
    if (line.empty()) continue;
    size_t t1 = line.find('\t');
    size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw ParseError(path + ": record needs name<TAB>dims...<TAB>values...", lineno);

    std::string name = line.substr(0, t1);
    if (name.empty()) throw ParseError(path + ": empty record name", lineno);
    if (records.count(name)) throw ParseError(path + ": duplicate record '" + name + "'", lineno);

    Record rec;
    {
      std::istringstream ds(line.substr(t1 + 1, t2 - t1 - 1));
      std::string tag;
      if (!(ds >> tag) || tag != "dims")
        throw ParseError(path + ": expected 'dims' field in record '" + name + "'", lineno);
      long long d;
      while (ds >> d) {
        if (d < 0) throw ParseError(path + ": negative dim in record '" + name + "'", lineno);
        rec.dims.push_back(static_cast<size_t>(d));
      }
      if (!ds.eof()) throw ParseError(path + ": bad dims in record '" + name + "'", lineno);
    }
    {
      std::istringstream vs(line.substr(t2 + 1));
      std::string tag;
      if (!(vs >> tag) || tag != "values")
        throw ParseError(path + ": expected 'values' field in record '" + name + "'", lineno);
      double v;
      while (vs >> v) rec.values.push_back(v);
      if (!vs.eof()) throw ParseError(path + ": bad values in record '" + name + "'", lineno);
    }
    size_t want = 1;
    for (size_t d : rec.dims) want *= d;
    if (want != rec.values.size())
      throw ParseError(path + ": record '" + name + "' has " + std::to_string(rec.values.size()) +
                           " values, dims imply " + std::to_string(want),
                       lineno);
    records.emplace(std::move(name), std::move(rec));
  }
  if (static_cast<long long>(records.size()) != declared)
    throw ParseError(path + ": header declares " + std::to_string(declared) + " records, found " +
                         std::to_string(records.size()),
                     lineno);

  auto take = [&](const std::string& name, const std::vector<size_t>& want_dims) -> Record& {
    auto it = records.find(name);
    if (it == records.end()) throw ContractError(path + ": missing record '" + name + "'");
    Record& rec = it->second;
    if (rec.dims != want_dims)
      throw ContractError(path + ": record '" + name + "' dims do not match model structure");
    rec.used = true;
    return rec;
  };
  visit_params(params, [&](const std::string& name, Tensor& t) {
    t.data = take(name, t.shape).values;
  });
  visit_bn_buffers(params, [&](const std::string& name, std::vector<double>& buf) {
    buf = take(name, {buf.size()}).values;
  });
  for (const auto& [name, rec] : records)
    if (!rec.used)
      throw ContractError(path + ": record '" + name + "' does not belong to this model");
}

ModelConfig load_checkpoint_config(const std::string& path) {
  std::ifstream in(path + ".cfg");
  if (!in.good()) throw ParseError("cannot open " + path + ".cfg", 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model_config_text(buf.str(), path + ".cfg");
}

}  // namespace dgcn
