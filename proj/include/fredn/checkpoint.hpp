#pragma once

// JSON checkpoints:
//   {
//     "format": "fredn-checkpoint", "version": 1,
//     "model": { ModelConfig fields },
//     "standardizer": {"mean": [...], "stddev": [...]},
//     "tensors": { "<name>": {"shape": [rows, cols], "data": [row-major values]} }
//   }
// Tensor names are the ModelParams::visit paths, e.g. "trend_mlp.blocks.0.weight".

#include <json.hpp>

#include <fstream>
#include <set>
#include <string>

#include "fredn/data.hpp"
#include "fredn/errors.hpp"
#include "fredn/model.hpp"

namespace fredn {

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"channels", c.channels},       {"lookback", c.lookback},
          {"horizon", c.horizon},         {"embed_dim", c.embed_dim},
          {"hidden_size", c.hidden_size}, {"depth", c.depth},
          {"dropout", c.dropout},         {"layer_norm", c.layer_norm},
          {"variant", to_string(c.variant)}, {"ma_window", c.ma_window},
          {"topk", c.topk},               {"mask_init_order", c.mask_init_order},
          {"revin_eps", c.revin_eps}};
}

// Missing keys keep their defaults; unknown keys are rejected.
inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  ModelConfig c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "channels") c.channels = v.get<Eigen::Index>();
      else if (key == "lookback") c.lookback = v.get<Eigen::Index>();
      else if (key == "horizon") c.horizon = v.get<Eigen::Index>();
      else if (key == "embed_dim") c.embed_dim = v.get<Eigen::Index>();
      else if (key == "hidden_size") c.hidden_size = v.get<Eigen::Index>();
      else if (key == "depth") c.depth = v.get<Eigen::Index>();
      else if (key == "dropout") c.dropout = v.get<double>();
      else if (key == "layer_norm") c.layer_norm = v.get<bool>();
      else if (key == "variant") c.variant = parse_variant(v.get<std::string>());
      else if (key == "ma_window") c.ma_window = v.get<Eigen::Index>();
      else if (key == "topk") c.topk = v.get<Eigen::Index>();
      else if (key == "mask_init_order") c.mask_init_order = v.get<double>();
      else if (key == "revin_eps") c.revin_eps = v.get<double>();
      else throw ConfigError("unknown model config key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("model config key '" + key + "': " + e.what());
    }
  }
  return c;
}

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

struct Checkpoint {
  ModelParams params;
  Standardizer scaler;
};

inline nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
  nlohmann::json tensors = nlohmann::json::object();
  ModelParams copy = ck.params;
  copy.visit([&](const std::string& name, Tensor& t) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(t.size()));
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) data.push_back(t(r, c));
    }
    tensors[name] = {{"shape", {t.rows(), t.cols()}}, {"data", std::move(data)}};
  });
  auto row = [](const Eigen::RowVectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"format", "fredn-checkpoint"},
          {"version", kCheckpointVersion},
          {"model", model_config_to_json(ck.params.config)},
          {"standardizer", {{"mean", row(ck.scaler.mean)}, {"stddev", row(ck.scaler.stddev)}}},
          {"tensors", std::move(tensors)}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "fredn-checkpoint") throw DataError("not a fredn checkpoint");
  if (j.value("version", 0) != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + j.value("version", nlohmann::json()).dump());
  }
  Checkpoint ck;
  ck.params = ModelParams::create(model_config_from_json(j.at("model")), 0);
  const auto& tensors = j.at("tensors");
  std::set<std::string> seen;
  ck.params.visit([&](const std::string& name, Tensor& t) {
    if (!tensors.contains(name)) throw DataError("checkpoint is missing tensor '" + name + "'");
    const auto& entry = tensors.at(name);
    const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
    const auto data = entry.at("data").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols() ||
        static_cast<Eigen::Index>(data.size()) != t.size()) {
      throw ConfigError("tensor '" + name + "': checkpoint shape " +
                        (shape.size() == 2 ? shape_string(shape[0], shape[1]) : std::string("?")) +
                        " vs model shape " + shape_string(t.rows(), t.cols()));
    }
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = data[static_cast<std::size_t>(r * t.cols() + c)];
    }
    seen.insert(name);
  });
  for (const auto& [name, _] : tensors.items()) {
    if (!seen.count(name)) throw DataError("checkpoint has unexpected tensor '" + name + "'");
  }
  const auto mean = j.at("standardizer").at("mean").get<std::vector<double>>();
  const auto sd = j.at("standardizer").at("stddev").get<std::vector<double>>();
  if (mean.size() != sd.size()) throw DataError("checkpoint standardizer is inconsistent");
  ck.scaler.mean = Eigen::Map<const Eigen::RowVectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  ck.scaler.stddev = Eigen::Map<const Eigen::RowVectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << checkpoint_to_json(ck).dump() << '\n';
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return checkpoint_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("'" + path + "': " + e.what());
  }
}

}  // namespace fredn
