#include "nasality/run_config.hpp"

#include <json.hpp>

#include <set>

#include "nasality/error.hpp"
#include "nasality/file_formats.hpp"

namespace nasality {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& keys, const std::string& section) {
  if (!j.is_object()) throw ConfigError(section + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!keys.contains(key)) throw ConfigError("unknown key '" + section + "." + key + "'");
}

}  // namespace

void RunConfig::validate() const {
  nasalance.validate();
  model.validate();
  train.validate();
}

std::string RunConfig::to_text() const {
  json j;
  j["nasalance"] = {{"hp_cutoff_hz", nasalance.hp_cutoff_hz},
                    {"rms_window_samples", nasalance.rms_window_samples},
                    {"target_rate_hz", nasalance.target_rate_hz},
                    {"smooth_window_samples", nasalance.smooth_window_samples}};
  j["model"] = json::parse(model.to_text());
  j["train"] = {{"lr", train.lr},
                {"batch_size", train.batch_size},
                {"beta1", train.beta1},
                {"beta2", train.beta2},
                {"adam_eps", train.adam_eps},
                {"lr_gamma", train.lr_gamma},
                {"max_epochs", train.max_epochs},
                {"early_stop_patience", train.early_stop_patience},
                {"n_trials", train.n_trials},
                {"seed", train.seed},
                {"targets", std::string(to_string(train.targets))},
                {"bn_refresh", train.bn_refresh}};
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  reject_unknown(j, {"nasalance", "model", "train"}, "run config");
  RunConfig cfg;
  try {
    if (j.contains("nasalance")) {
      const json& n = j["nasalance"];
      reject_unknown(n, {"hp_cutoff_hz", "rms_window_samples", "target_rate_hz", "smooth_window_samples"},
                     "nasalance");
      cfg.nasalance.hp_cutoff_hz = n.value("hp_cutoff_hz", cfg.nasalance.hp_cutoff_hz);
      cfg.nasalance.rms_window_samples = n.value("rms_window_samples", cfg.nasalance.rms_window_samples);
      cfg.nasalance.target_rate_hz = n.value("target_rate_hz", cfg.nasalance.target_rate_hz);
      cfg.nasalance.smooth_window_samples =
          n.value("smooth_window_samples", cfg.nasalance.smooth_window_samples);
    }
    if (j.contains("model")) cfg.model = ModelConfig::from_text(j["model"].dump());
    if (j.contains("train")) {
      const json& t = j["train"];
      reject_unknown(t,
                     {"lr", "batch_size", "beta1", "beta2", "adam_eps", "lr_gamma", "max_epochs",
                      "early_stop_patience", "n_trials", "seed", "targets", "bn_refresh"},
                     "train");
      TrainConfig& c = cfg.train;
      c.lr = t.value("lr", c.lr);
      c.batch_size = t.value("batch_size", c.batch_size);
      c.beta1 = t.value("beta1", c.beta1);
      c.beta2 = t.value("beta2", c.beta2);
      c.adam_eps = t.value("adam_eps", c.adam_eps);
      c.lr_gamma = t.value("lr_gamma", c.lr_gamma);
      c.max_epochs = t.value("max_epochs", c.max_epochs);
      c.early_stop_patience = t.value("early_stop_patience", c.early_stop_patience);
      c.n_trials = t.value("n_trials", c.n_trials);
      c.seed = t.value("seed", c.seed);
      c.bn_refresh = t.value("bn_refresh", c.bn_refresh);
      if (t.contains("targets")) c.targets = parse_target_set(t["targets"].get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  return from_text(read_text_file(path));
}

}  // namespace nasality
