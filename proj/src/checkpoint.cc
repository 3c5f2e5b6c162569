// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "danet/checkpoint.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace danet::io {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'D', 'A', 'N', 'E', 'T', 'C', 'K', 'P'};

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i)
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::vector<std::uint8_t>& b, std::size_t at,
                     int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
  return v;
}

json model_to_json(const inference::ModelConfig& m) {
  return json{
      {"type", inference::to_string(m.type)},
      {"net",
       {{"freq_bins", m.net.freq_bins},
        {"context", m.net.context},
        {"hidden_sizes", m.net.hidden_sizes},
        {"embed_dim", m.net.embed_dim}}},
      {"stft", {{"window_len", m.stft.window_len}, {"hop", m.stft.hop}}},
      {"num_anchors", m.num_anchors},
      {"slots", m.slots},
      {"nonlinearity", attractor::to_string(m.nonlinearity)},
      {"keep_fraction", m.keep_fraction},
      {"log_floor", m.log_floor}};
}

inference::ModelConfig model_from_json(const json& j) {
  inference::ModelConfig m;
  m.type = inference::parse_model_type(j.at("type").get<std::string>());
  const json& net = j.at("net");
  m.net.freq_bins = net.at("freq_bins").get<int>();
  m.net.context = net.at("context").get<int>();
  m.net.hidden_sizes = net.at("hidden_sizes").get<std::vector<int>>();
  m.net.embed_dim = net.at("embed_dim").get<int>();
  m.stft.window_len = j.at("stft").at("window_len").get<int>();
  m.stft.hop = j.at("stft").at("hop").get<int>();
  m.num_anchors = j.at("num_anchors").get<int>();
  m.slots = j.at("slots").get<int>();
  m.nonlinearity =
      attractor::parse_nonlinearity(j.at("nonlinearity").get<std::string>());
  m.keep_fraction = j.at("keep_fraction").get<double>();
  m.log_floor = j.at("log_floor").get<double>();
  m.net.validate();
  m.stft.validate();
  if (m.net.freq_bins != m.stft.num_bins())
    throw std::runtime_error("net freq_bins does not match the STFT size");
  return m;
}

// JSON has no infinity; an unset best loss is stored as null.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

double from_finite_or_null(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity()
                     : j.get<double>();
}

struct ArrayWriter {
  json manifest = json::array();
  std::vector<std::uint8_t> data;

  void add(const std::string& name, const nn::Matrix& m) {
    manifest.push_back(
        {{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", data.size()}});
    for (Eigen::Index i = 0; i < m.size(); ++i)
      put_le(data, std::bit_cast<std::uint64_t>(m.data()[i]), 8);
  }
};

}  // namespace

inference::Model Checkpoint::to_model() const {
  inference::Model m;
  m.config = model;
  m.params = best_params ? *best_params : params;
  m.fixed_attractors = fixed_attractors;
  return m;
}

std::vector<std::uint8_t> checkpoint_encode(const Checkpoint& c) {
  ArrayWriter arrays;
  for (const auto& [name, m] : c.params.arrays) arrays.add("param/" + name, m);
  for (const auto& [name, m] : c.adam.first_moment)
    arrays.add("adam.m/" + name, m);
  for (const auto& [name, m] : c.adam.second_moment)
    arrays.add("adam.v/" + name, m);
  if (c.best_params)
    for (const auto& [name, m] : c.best_params->arrays)
      arrays.add("best/" + name, m);
  if (c.fixed_attractors) arrays.add("fixed_attractors", *c.fixed_attractors);

  const TrainingState& t = c.training;
  json header{
      {"model", model_to_json(c.model)},
      {"seed", c.params.seed},
      {"best_seed", c.best_params ? c.best_params->seed : c.params.seed},
      {"training",
       {{"epoch", t.epoch},
        {"phase", t.phase},
        {"phase_epochs", t.phase_epochs},
        {"epochs_since_best", t.epochs_since_best},
        {"lr_counter", t.lr_counter},
        {"best_valid_loss", finite_or_null(t.best_valid_loss)},
        {"finished", t.finished}}},
      {"adam",
       {{"step", c.adam.step},
        {"lr", c.adam.lr},
        {"beta1", c.adam.beta1},
        {"beta2", c.adam.beta2},
        {"eps", c.adam.eps}}},
      {"arrays", arrays.manifest}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put_le(out, kCheckpointVersion, 4);
  put_le(out, text.size(), 8);
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), arrays.data.begin(), arrays.data.end());
  return out;
}

Checkpoint checkpoint_decode(const std::vector<std::uint8_t>& b) {
  if (b.size() < 20 || std::memcmp(b.data(), kMagic, 8) != 0)
    throw std::runtime_error("not a danet checkpoint (bad magic)");
  const auto version = static_cast<std::uint32_t>(get_le(b, 8, 4));
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint version " + std::to_string(version) +
                             " unsupported (expected " +
                             std::to_string(kCheckpointVersion) + ")");
  const std::uint64_t header_len = get_le(b, 12, 8);
  if (header_len > b.size() - 20)
    throw std::runtime_error("checkpoint header truncated");
  const json header = json::parse(b.begin() + 20,
                                  b.begin() + 20 + static_cast<std::ptrdiff_t>(header_len));
  const std::size_t data_start = 20 + header_len;
  const std::size_t data_size = b.size() - data_start;

  Checkpoint c;
  c.model = model_from_json(header.at("model"));
  c.params.seed = header.at("seed").get<std::uint64_t>();
  const json& t = header.at("training");
  c.training.epoch = t.at("epoch").get<int>();
  c.training.phase = t.at("phase").get<int>();
  c.training.phase_epochs = t.at("phase_epochs").get<int>();
  c.training.epochs_since_best = t.at("epochs_since_best").get<int>();
  c.training.lr_counter = t.at("lr_counter").get<int>();
  c.training.best_valid_loss = from_finite_or_null(t.at("best_valid_loss"));
  c.training.finished = t.at("finished").get<bool>();
  const json& a = header.at("adam");
  c.adam.step = a.at("step").get<std::int64_t>();
  c.adam.lr = a.at("lr").get<double>();
  c.adam.beta1 = a.at("beta1").get<double>();
  c.adam.beta2 = a.at("beta2").get<double>();
  c.adam.eps = a.at("eps").get<double>();

  for (const json& entry : header.at("arrays")) {
    const std::string name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
    if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0)
      throw std::runtime_error("array '" + name + "' has a malformed shape");
    const std::uint64_t count =
        static_cast<std::uint64_t>(shape[0]) * static_cast<std::uint64_t>(shape[1]);
    if (offset > data_size || count > (data_size - offset) / 8)
      throw std::runtime_error("array '" + name +
                               "' extends past the end of the file");
    nn::Matrix m(shape[0], shape[1]);
    for (std::uint64_t i = 0; i < count; ++i)
      m.data()[i] = std::bit_cast<double>(get_le(b, data_start + offset + 8 * i, 8));

    auto slash = name.find('/');
    const std::string group = name.substr(0, slash);
    const std::string key = slash == std::string::npos ? "" : name.substr(slash + 1);
    if (group == "param") {
      c.params.arrays[key] = std::move(m);
    } else if (group == "adam.m") {
      c.adam.first_moment[key] = std::move(m);
    } else if (group == "adam.v") {
      c.adam.second_moment[key] = std::move(m);
    } else if (group == "best") {
      if (!c.best_params) {
        c.best_params.emplace();
        c.best_params->seed = header.at("best_seed").get<std::uint64_t>();
      }
      c.best_params->arrays[key] = std::move(m);
    } else if (name == "fixed_attractors") {
      c.fixed_attractors = std::move(m);
    } else {
      throw std::runtime_error("unknown array '" + name + "'");
    }
  }

  // Every array must match the shapes implied by the model config.
  const auto expected = nn::param_shapes(
      c.model.net, c.model.type == inference::ModelType::kAdanet
                       ? c.model.num_anchors
                       : 0);
  auto check_group = [&](const std::map<std::string, nn::Matrix>& arrays,
                         const std::string& group, bool complete) {
    for (const auto& [name, m] : arrays) {
      auto it = expected.find(name);
      if (it == expected.end())
        throw std::runtime_error(group + " array '" + name +
                                 "' is not part of this model");
      if (m.rows() != it->second.first || m.cols() != it->second.second)
        throw std::runtime_error(
            "shape mismatch for " + group + " array '" + name + "': stored " +
            std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
            ", config needs " + std::to_string(it->second.first) + "x" +
            std::to_string(it->second.second));
    }
    if (complete && arrays.size() != expected.size())
      throw std::runtime_error(group + " arrays are incomplete");
  };
  check_group(c.params.arrays, "param", true);
  check_group(c.adam.first_moment, "adam.m", false);
  check_group(c.adam.second_moment, "adam.v", false);
  if (c.best_params) check_group(c.best_params->arrays, "best", true);
  if (c.fixed_attractors && c.fixed_attractors->cols() != c.model.net.embed_dim)
    throw std::runtime_error("fixed attractors have the wrong dimension");
  return c;
}

void checkpoint_save(const Checkpoint& c, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = checkpoint_encode(c);
  // Write to a sibling file and rename so readers never see a partial file.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw std::runtime_error("cannot move checkpoint to " + path.string() +
                             ": " + ec.message());
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return checkpoint_decode(bytes);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

}  // namespace danet::io
