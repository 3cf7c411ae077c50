#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qunet/models.hpp"

namespace qunet::models {

// Checkpoints are a pair of files: <prefix>.json holds the shape manifest
// (parameter names, shapes, offsets into the flat array) and <prefix>.bin the
// raw little-endian float64 parameter values. Round trips are bit exact.

inline void save_checkpoint(Model& model, const std::string& prefix) {
  nlohmann::json manifest;
  manifest["format"] = "qunet-checkpoint-v1";
  manifest["variant"] = variant_name(model.config.variant);
  manifest["scale"] = scale_name(model.config.scale);
  manifest["input_size"] = model.config.input_size;

  nlohmann::json plist = nlohmann::json::array();
  long long offset = 0;
  std::vector<double> flat;
  for (const ParamRef& p : model.params()) {
    nlohmann::json e;
    e["name"] = p.name;
    e["shape"] = p.tensor->shape;
    e["offset"] = offset;
    e["count"] = p.tensor->size();
    e["quantum"] = p.quantum;
    plist.push_back(e);
    flat.insert(flat.end(), p.tensor->data.begin(), p.tensor->data.end());
    offset += p.tensor->size();
  }
  manifest["params"] = plist;
  manifest["total"] = offset;

  std::ofstream mf(prefix + ".json");
  if (!mf) throw std::runtime_error("save_checkpoint: cannot write " + prefix + ".json");
  mf << manifest.dump(2) << "\n";

  std::ofstream bf(prefix + ".bin", std::ios::binary);
  if (!bf) throw std::runtime_error("save_checkpoint: cannot write " + prefix + ".bin");
  bf.write(reinterpret_cast<const char*>(flat.data()),
           static_cast<std::streamsize>(flat.size() * sizeof(double)));
}

inline void load_checkpoint(Model& model, const std::string& prefix) {
  std::ifstream mf(prefix + ".json");
  if (!mf) throw std::runtime_error("load_checkpoint: cannot read " + prefix + ".json");
  nlohmann::json manifest = nlohmann::json::parse(mf);
  if (manifest.value("format", "") != "qunet-checkpoint-v1")
    throw std::runtime_error("load_checkpoint: unrecognized manifest format");

  std::ifstream bf(prefix + ".bin", std::ios::binary);
  if (!bf) throw std::runtime_error("load_checkpoint: cannot read " + prefix + ".bin");
  bf.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::size_t>(bf.tellg());
  bf.seekg(0, std::ios::beg);
  std::vector<double> flat(bytes / sizeof(double));
  bf.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(bytes));

  const auto& plist = manifest["params"];
  auto refs = model.params();
  if (plist.size() != refs.size())
    throw std::runtime_error("load_checkpoint: manifest lists " +
                             std::to_string(plist.size()) + " parameters, model has " +
                             std::to_string(refs.size()));
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& e = plist[i];
    if (e["name"] != refs[i].name)
      throw std::runtime_error("load_checkpoint: parameter order mismatch at '" +
                               refs[i].name + "'");
    const std::vector<int> shape = e["shape"].get<std::vector<int>>();
    if (shape != refs[i].tensor->shape)
      throw std::runtime_error("load_checkpoint: shape mismatch for '" + refs[i].name + "'");
    const auto off = e["offset"].get<long long>();
    const auto cnt = e["count"].get<long long>();
    if (off < 0 || static_cast<std::size_t>(off + cnt) > flat.size())
      throw std::runtime_error("load_checkpoint: manifest offsets exceed binary payload");
    std::copy(flat.begin() + off, flat.begin() + off + cnt, refs[i].tensor->data.begin());
  }
}

}  // namespace qunet::models
