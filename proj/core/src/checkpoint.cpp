#include <json.hpp>

#include <fstream>
#include <set>

#include "binary_io.hpp"
#include "nasality/error.hpp"
#include "nasality/tcn.hpp"

namespace nasality {
namespace {

using nlohmann::json;

constexpr std::uint32_t kCheckpointVersion = 1;

const std::set<std::string>& model_config_keys() {
  static const std::set<std::string> keys{
      "in_channels", "pre_filters", "dilated_filters", "dilations", "kernel_dilated",
      "upsample_factor", "pool_window", "n_targets", "precision", "seed", "input_frames"};
  return keys;
}

template <typename Real>
void write_blob(std::ostream& os, const std::string& name, const std::vector<std::size_t>& shape,
                std::span<const Real> values) {
  detail::put_string(os, name);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) detail::put<std::uint64_t>(os, d);
  detail::put<std::uint64_t>(os, values.size());
  for (Real v : values) detail::put<float>(os, static_cast<float>(v));
}

template <typename Real>
void read_blob(std::istream& is, const std::string& name, const std::vector<std::size_t>& shape,
               std::span<Real> values) {
  const std::string got = detail::get_string(is, 4096);
  if (got != name) throw IoError("checkpoint: expected blob '" + name + "', found '" + got + "'");
  const auto ndim = detail::get<std::uint32_t>(is);
  if (ndim != shape.size()) throw IoError("checkpoint: rank mismatch for '" + name + "'");
  for (std::size_t d : shape) {
    if (detail::get<std::uint64_t>(is) != d)
      throw IoError("checkpoint: shape mismatch for '" + name + "'");
  }
  if (detail::get<std::uint64_t>(is) != values.size())
    throw IoError("checkpoint: length mismatch for '" + name + "'");
  for (Real& v : values) {
    const auto f = detail::get<float>(is);
    if (!std::isfinite(f)) throw IoError("checkpoint: non-finite value in '" + name + "'");
    v = static_cast<Real>(f);
  }
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("model.") + name + " must be positive");
  };
  positive(in_channels, "in_channels");
  positive(pre_filters, "pre_filters");
  positive(dilated_filters, "dilated_filters");
  positive(kernel_dilated, "kernel_dilated");
  positive(upsample_factor, "upsample_factor");
  positive(pool_window, "pool_window");
  positive(n_targets, "n_targets");
  positive(input_frames, "input_frames");
  if (kernel_dilated % 2 == 0) throw ConfigError("model.kernel_dilated must be odd");
  if (dilations.empty()) throw ConfigError("model.dilations must not be empty");
  for (std::size_t i = 0; i < dilations.size(); ++i) {
    if (dilations[i] == 0) throw ConfigError("model.dilations must be positive");
    if (i > 0 && dilations[i] <= dilations[i - 1])
      throw ConfigError("model.dilations must be strictly ascending");
  }
  if ((input_frames * upsample_factor) % pool_window != 0)
    throw ConfigError("model: input_frames * upsample_factor must be divisible by pool_window");
}

std::string ModelConfig::to_text() const {
  json j;
  j["in_channels"] = in_channels;
  j["pre_filters"] = pre_filters;
  j["dilated_filters"] = dilated_filters;
  j["dilations"] = dilations;
  j["kernel_dilated"] = kernel_dilated;
  j["upsample_factor"] = upsample_factor;
  j["pool_window"] = pool_window;
  j["n_targets"] = n_targets;
  j["precision"] = precision == Precision::f32 ? "f32" : "f64";
  j["seed"] = seed;
  j["input_frames"] = input_frames;
  return j.dump(2) + "\n";
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("model config must be an object");
  ModelConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (!model_config_keys().contains(key)) throw ConfigError("model config: unknown key '" + key + "'");
      if (key == "in_channels") cfg.in_channels = value.get<std::size_t>();
      else if (key == "pre_filters") cfg.pre_filters = value.get<std::size_t>();
      else if (key == "dilated_filters") cfg.dilated_filters = value.get<std::size_t>();
      else if (key == "dilations") cfg.dilations = value.get<std::vector<std::size_t>>();
      else if (key == "kernel_dilated") cfg.kernel_dilated = value.get<std::size_t>();
      else if (key == "upsample_factor") cfg.upsample_factor = value.get<std::size_t>();
      else if (key == "pool_window") cfg.pool_window = value.get<std::size_t>();
      else if (key == "n_targets") cfg.n_targets = value.get<std::size_t>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "input_frames") cfg.input_frames = value.get<std::size_t>();
      else if (key == "precision") {
        const auto p = value.get<std::string>();
        if (p == "f32") cfg.precision = Precision::f32;
        else if (p == "f64") cfg.precision = Precision::f64;
        else throw ConfigError("model.precision must be f32 or f64");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

template <typename Real>
void save_checkpoint(const std::string& path, Tcn<Real>& model) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write("VTCK", 4);
  detail::put<std::uint32_t>(os, kCheckpointVersion);
  detail::put_string(os, model.config().to_text());
  auto params = model.parameters();
  auto bufs = model.buffers();
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size() + bufs.size()));
  for (const auto& p : params)
    write_blob<Real>(os, p.name, p.shape, std::span<const Real>(p.value));
  for (const auto& b : bufs)
    write_blob<Real>(os, b.name, b.shape, std::span<const Real>(b.value));
  if (!os) throw IoError("failed writing checkpoint " + path);
}

namespace {

ModelConfig read_header(std::istream& is) {
  detail::expect_magic(is, "VTCK");
  if (detail::get<std::uint32_t>(is) != kCheckpointVersion)
    throw IoError("checkpoint: unsupported version");
  try {
    return ModelConfig::from_text(detail::get_string(is, 1u << 20));
  } catch (const ConfigError& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace

ModelConfig read_checkpoint_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);
  return read_header(is);
}

template <typename Real>
Tcn<Real> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);
  Tcn<Real> model(read_header(is));
  auto params = model.parameters();
  auto bufs = model.buffers();
  if (detail::get<std::uint32_t>(is) != params.size() + bufs.size())
    throw IoError("checkpoint: blob count does not match the configured architecture");
  for (auto& p : params) read_blob<Real>(is, p.name, p.shape, p.value);
  for (auto& b : bufs) {
    read_blob<Real>(is, b.name, b.shape, b.value);
    if (b.name.ends_with("running_var")) {
      for (Real v : b.value)
        if (!(v > Real(0))) throw IoError("checkpoint: running variance must be positive");
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError("checkpoint: trailing bytes");
  return model;
}

template void save_checkpoint<float>(const std::string&, Tcn<float>&);
template void save_checkpoint<double>(const std::string&, Tcn<double>&);
template Tcn<float> load_checkpoint<float>(const std::string&);
template Tcn<double> load_checkpoint<double>(const std::string&);

}  // namespace nasality
