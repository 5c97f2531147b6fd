#include "exitnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace exitnet {

namespace {

constexpr char kMagic[8] = {'E', 'X', 'N', 'C', 'K', 'P', 'T', '\0'};

static_assert(std::numeric_limits<double>::is_iec559);

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

void put_tensor(std::string& out, const Tensor& t) {
  for (double d : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(d));
}

struct ArrayEntry {
  std::string name;
  const Tensor* tensor;
};

}  // namespace

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"num_layers", c.num_layers}, {"width", c.width},
          {"input_dim", c.input_dim},   {"num_classes", c.num_classes},
          {"nonlinearity", to_string(c.nonlinearity)}, {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.num_layers = j.at("num_layers").get<int>();
  c.width = j.at("width").get<int>();
  c.input_dim = j.at("input_dim").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.nonlinearity = parse_nonlinearity(j.at("nonlinearity").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng rng_from_state(const std::string& state) {
  std::istringstream is(state);
  Rng rng;
  is >> rng;
  if (!is) throw CheckpointError("corrupt RNG state in checkpoint");
  return rng;
}

void save_checkpoint(const std::string& path, const MultiExitModel& model, const CheckpointExtras& extras) {
  std::vector<ArrayEntry> entries;
  for (const auto& p : model.parameters()) entries.push_back({"param/" + p.name, &p.value});
  if (extras.optimizer) {
    const auto& opt = *extras.optimizer;
    if (opt.first_moment.size() != model.parameters().size() && !opt.first_moment.empty()) {
      throw std::invalid_argument("checkpoint: optimizer state does not match the model");
    }
    for (std::size_t i = 0; i < opt.first_moment.size(); ++i) {
      entries.push_back({"optim.m/" + model.parameters()[i].name, &opt.first_moment[i]});
      entries.push_back({"optim.v/" + model.parameters()[i].name, &opt.second_moment[i]});
    }
  }
  for (const auto& [name, t] : extras.arrays) entries.push_back({"extra/" + name, &t});

  nlohmann::ordered_json header;
  header["format"] = "exitnet-checkpoint";
  header["version"] = kCheckpointVersion;
  header["config"] = config_to_json(model.config());
  nlohmann::ordered_json arrays = nlohmann::ordered_json::array();
  for (const auto& e : entries) arrays.push_back({{"name", e.name}, {"shape", e.tensor->shape()}});
  header["arrays"] = arrays;
  nlohmann::ordered_json ex;
  ex["step"] = extras.step;
  ex["rng"] = extras.rng_states;
  ex["has_optimizer"] = extras.optimizer.has_value();
  if (extras.optimizer) ex["optimizer_step"] = extras.optimizer->step;
  ex["meta"] = extras.meta;
  header["extras"] = ex;

  const std::string text = header.dump(2);
  std::string blob(kMagic, sizeof(kMagic));
  put_u64(blob, text.size());
  blob += text;
  for (const auto& e : entries) put_tensor(blob, *e.tensor);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw CheckpointError("failed writing checkpoint '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path + "'");
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("'" + path + "' is not a checkpoint (bad magic or truncated)");
  }
  const std::uint64_t header_len = get_u64(blob.data() + 8);
  if (header_len > blob.size() - 16) throw CheckpointError("truncated checkpoint: header incomplete");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.begin() + 16, blob.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  try {
    if (header.at("format").get<std::string>() != "exitnet-checkpoint") throw CheckpointError("not an exitnet checkpoint");
    if (header.at("version").get<int>() != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version");

    const ModelConfig cfg = config_from_json(header.at("config"));
    std::map<std::string, Tensor> arrays;
    std::vector<std::string> order;
    std::size_t offset = 16 + header_len;
    for (const auto& a : header.at("arrays")) {
      const auto name = a.at("name").get<std::string>();
      const auto shape = a.at("shape").get<Shape>();
      const std::size_t count = shape_size(shape);
      if (count > (blob.size() - offset) / 8) throw CheckpointError("truncated checkpoint: array '" + name + "' incomplete");
      std::vector<double> values(count);
      for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<double>(get_u64(blob.data() + offset + 8 * i));
      offset += 8 * count;
      arrays.emplace(name, Tensor(shape, std::move(values)));
      order.push_back(name);
    }
    if (offset != blob.size()) throw CheckpointError("checkpoint has trailing bytes");

    MultiExitModel model(cfg);
    for (auto& p : model.parameters()) {
      auto it = arrays.find("param/" + p.name);
      if (it == arrays.end()) throw CheckpointError("checkpoint is missing parameter '" + p.name + "'");
      if (it->second.shape() != p.value.shape()) throw CheckpointError("shape mismatch for parameter '" + p.name + "'");
      p.value = it->second;
    }

    LoadedCheckpoint out{std::move(model), {}};
    const auto& ex = header.at("extras");
    out.extras.step = ex.at("step").get<std::uint64_t>();
    out.extras.rng_states = ex.at("rng").get<std::map<std::string, std::string>>();
    out.extras.meta = ex.at("meta");
    if (ex.at("has_optimizer").get<bool>()) {
      AdamWState opt;
      opt.step = ex.at("optimizer_step").get<std::uint64_t>();
      for (const auto& p : out.model.parameters()) {
        auto m = arrays.find("optim.m/" + p.name);
        auto v = arrays.find("optim.v/" + p.name);
        if (m == arrays.end() || v == arrays.end()) {
          if (opt.first_moment.empty()) break;
          throw CheckpointError("checkpoint optimizer state is incomplete");
        }
        opt.first_moment.push_back(m->second);
        opt.second_moment.push_back(v->second);
      }
      out.extras.optimizer = std::move(opt);
    }
    for (const auto& name : order) {
      if (name.rfind("extra/", 0) == 0) out.extras.arrays.emplace(name.substr(6), arrays.at(name));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid checkpoint: ") + e.what());
  }
}

CheckpointExtras extras_from_trainer(const TrainerState& state) {
  CheckpointExtras ex;
  ex.optimizer = state.optimizer;
  ex.step = state.global_step;
  ex.rng_states["data"] = rng_state(state.data_rng);
  ex.rng_states["threshold"] = rng_state(state.threshold_rng);
  const auto& t = state.tracker;
  ex.meta["epoch"] = state.epoch;
  ex.meta["range_epoch"] = t.current().epoch;
  ex.meta["range_observed"] = t.observed_any();
  ex.arrays["trainer.range"] =
      Tensor::vector({t.current().lo, t.current().hi, t.running_min(), t.running_max()});
  return ex;
}

TrainerState trainer_state_from_extras(const CheckpointExtras& extras) {
  TrainerState s;
  if (!extras.optimizer) throw CheckpointError("checkpoint has no optimizer state to resume from");
  s.optimizer = *extras.optimizer;
  s.global_step = extras.step;
  try {
    s.epoch = extras.meta.at("epoch").get<int>();
    s.data_rng = rng_from_state(extras.rng_states.at("data"));
    s.threshold_rng = rng_from_state(extras.rng_states.at("threshold"));
    const Tensor& r = extras.arrays.at("trainer.range");
    if (r.size() != 4) throw CheckpointError("corrupt trainer range state");
    s.tracker.restore(ThresholdRange{r[0], r[1], extras.meta.at("range_epoch").get<int>()},
                      extras.meta.at("range_observed").get<bool>(), r[2], r[3]);
  } catch (const std::out_of_range&) {
    throw CheckpointError("checkpoint has no resumable trainer state");
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError("checkpoint has no resumable trainer state");
  }
  return s;
}

}  // namespace exitnet
