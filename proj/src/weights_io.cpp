#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "ldet/d3f.hpp"

namespace ldet {

namespace {

using nlohmann::json;

json read_document(const std::string& path, const char* expected_kind) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open weight file: " + path);
  json doc = json::parse(in);
  if (doc.value("format_version", 0) != 1) {
    throw std::runtime_error("unsupported weight file version in " + path);
  }
  if (doc.value("kind", "") != expected_kind) {
    throw std::runtime_error("weight file " + path + " is not of kind '" +
                             expected_kind + "'");
  }
  return doc;
}

void write_document(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write weight file: " + path);
  out << doc.dump(1) << '\n';
}

std::vector<double> params_field(const json& doc, std::size_t expected) {
  std::vector<double> p = doc.at("params").get<std::vector<double>>();
  if (p.size() != expected) {
    throw std::runtime_error("weight file has " + std::to_string(p.size()) +
                             " parameters, expected " + std::to_string(expected));
  }
  return p;
}

}  // namespace

void save_mlp(const std::string& path, const MlpD3F& net) {
  json doc;
  doc["format_version"] = 1;
  doc["kind"] = "mlp";
  doc["layers"] = {1, 5, 5, 2};
  doc["params"] = net.params;
  write_document(path, doc);
}

MlpD3F load_mlp(const std::string& path) {
  const json doc = read_document(path, "mlp");
  MlpD3F net;
  net.params = params_field(doc, MlpD3F::kParamCount);
  return net;
}

void save_mixture(const std::string& path, const MixtureD3F& mix) {
  mix.check();
  json doc;
  doc["format_version"] = 1;
  doc["kind"] = "mixture";
  doc["thetas"] = mix.thetas;
  doc["weights"] = mix.weights;
  json members = json::array();
  for (const MlpD3F& m : mix.members) members.push_back(m.params);
  doc["members"] = members;
  write_document(path, doc);
}

MixtureD3F load_mixture(const std::string& path) {
  const json doc = read_document(path, "mixture");
  MixtureD3F mix;
  mix.thetas = doc.at("thetas").get<std::vector<double>>();
  mix.weights = doc.at("weights").get<std::vector<double>>();
  for (const json& m : doc.at("members")) {
    MlpD3F net;
    net.params = m.get<std::vector<double>>();
    if (net.params.size() != MlpD3F::kParamCount) {
      throw std::runtime_error("mixture member has wrong parameter count in " + path);
    }
    mix.members.push_back(std::move(net));
  }
  mix.check();
  return mix;
}

void save_cnn(const std::string& path, const CnnD3F& net) {
  json doc;
  doc["format_version"] = 1;
  doc["kind"] = "cnn";
  doc["width"] = net.width;
  doc["height"] = net.height;
  doc["filters"] = CnnD3F::kFilters;
  doc["kernel"] = CnnD3F::kKernel;
  doc["params"] = net.params;
  write_document(path, doc);
}

CnnD3F load_cnn(const std::string& path) {
  const json doc = read_document(path, "cnn");
  if (doc.value("filters", 0) != CnnD3F::kFilters ||
      doc.value("kernel", 0) != CnnD3F::kKernel) {
    throw std::runtime_error("cnn weight file architecture mismatch in " + path);
  }
  CnnD3F net(doc.at("width").get<int>(), doc.at("height").get<int>());
  net.params = params_field(doc, net.param_count());
  return net;
}

}  // namespace ldet
