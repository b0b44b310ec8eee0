// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "votedet/network.hpp"

namespace votedet {

namespace {

constexpr char kMagic[4] = {'V', 'D', 'M', '1'};
constexpr uint32_t kVersion = 1;

nlohmann::json grid_to_json(const GridConfig& g) {
  return {{"cell_size", g.cell_size},
          {"origin", {g.origin.x, g.origin.y, g.origin.z}},
          {"extents", {g.extent_x, g.extent_y, g.extent_z}},
          {"angular_bins", g.angular_bins}};
}

GridConfig grid_from_json(const nlohmann::json& j) {
  GridConfig g;
  g.cell_size = j.at("cell_size").get<float>();
  g.origin = {j.at("origin").at(0).get<float>(), j.at("origin").at(1).get<float>(),
              j.at("origin").at(2).get<float>()};
  g.extent_x = j.at("extents").at(0).get<int>();
  g.extent_y = j.at("extents").at(1).get<int>();
  g.extent_z = j.at("extents").at(2).get<int>();
  g.angular_bins = j.at("angular_bins").get<int>();
  return g;
}

void write_exact(std::ofstream& out, const void* data, size_t bytes) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw std::runtime_error("model write failed");
}

void read_exact(std::ifstream& in, void* data, size_t bytes, const char* what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (in.gcount() != static_cast<std::streamsize>(bytes)) {
    throw std::runtime_error(std::string("model file truncated while reading ") + what);
  }
}

}  // namespace

void save_model(const Network& net, const ModelMetadata& meta, const std::string& path) {
  net.validate();

  nlohmann::json header;
  header["class_box"] = {{"class", meta.class_box.class_name},
                         {"length", meta.class_box.length},
                         {"width", meta.class_box.width},
                         {"height", meta.class_box.height}};
  header["grid"] = grid_to_json(meta.grid);
  header["model_kind"] = std::string(1, meta.model_kind);
  header["sparsity_penalty"] = meta.sparsity_penalty;
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerSpec& l : net.architecture().layers) {
    layers.push_back({{"kernel", {l.kernel_x, l.kernel_y, l.kernel_z}},
                      {"in", l.in_channels},
                      {"out", l.out_channels},
                      {"relu", l.has_relu}});
  }
  header["layers"] = layers;
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open model file for writing: " + path);
  write_exact(out, kMagic, sizeof(kMagic));
  const uint32_t version = kVersion;
  write_exact(out, &version, sizeof(version));
  const uint64_t header_len = header_text.size();
  write_exact(out, &header_len, sizeof(header_len));
  write_exact(out, header_text.data(), header_text.size());
  for (const FilterBank& bank : net.banks()) {
    write_exact(out, bank.weights().data(), bank.weights().size() * sizeof(float));
    write_exact(out, bank.biases().data(), bank.biases().size() * sizeof(float));
  }
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file: " + path);

  char magic[4];
  read_exact(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a model file: bad magic in " + path);
  }
  uint32_t version = 0;
  read_exact(in, &version, sizeof(version), "version");
  if (version != kVersion) {
    throw std::runtime_error("unsupported model version " + std::to_string(version));
  }
  uint64_t header_len = 0;
  read_exact(in, &header_len, sizeof(header_len), "header length");
  if (header_len > (64u << 20)) throw std::runtime_error("model header length is implausible");
  std::string header_text(header_len, '\0');
  read_exact(in, header_text.data(), header_len, "header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("model header is not valid JSON: ") + e.what());
  }

  LoadedModel model;
  try {
    model.metadata.grid = grid_from_json(header.at("grid"));
    const auto& cb = header.at("class_box");
    model.metadata.class_box = {cb.at("class").get<std::string>(), cb.at("length").get<float>(),
                                cb.at("width").get<float>(), cb.at("height").get<float>()};
    model.metadata.sparsity_penalty = header.at("sparsity_penalty").get<float>();
    model.metadata.model_kind = header.at("model_kind").get<std::string>().at(0);

    Architecture arch;
    arch.class_name = model.metadata.class_box.class_name;
    for (const auto& jl : header.at("layers")) {
      arch.layers.push_back({jl.at("kernel").at(0).get<int>(), jl.at("kernel").at(1).get<int>(),
                             jl.at("kernel").at(2).get<int>(), jl.at("in").get<int>(),
                             jl.at("out").get<int>(), jl.at("relu").get<bool>()});
    }
    std::vector<FilterBank> banks;
    for (const LayerSpec& l : arch.layers) {
      FilterBank bank(l.kernel_x, l.kernel_y, l.kernel_z, l.in_channels, l.out_channels);
      read_exact(in, bank.weights().data(), bank.weights().size() * sizeof(float), "weights");
      read_exact(in, bank.biases().data(), bank.biases().size() * sizeof(float), "biases");
      banks.push_back(std::move(bank));
    }
    model.network = Network(std::move(arch), std::move(banks));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("model header is missing fields: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("model file violates invariants: ") + e.what());
  }
  return model;
}

}  // namespace votedet
