// nasality: command-line front end for corpus synthesis, parameter
// extraction, dataset preparation, training and evaluation.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "nasality/acoustic_frontend.hpp"
#include "nasality/compute.hpp"
#include "nasality/dataset.hpp"
#include "nasality/error.hpp"
#include "nasality/evaluation.hpp"
#include "nasality/file_formats.hpp"
#include "nasality/run_config.hpp"
#include "nasality/synth_corpus.hpp"
#include "nasality/training.hpp"

namespace fs = std::filesystem;
using namespace nasality;

namespace {

constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;

RunConfig load_config(const std::string& path) {
  return path.empty() ? RunConfig{} : RunConfig::load(path);
}

bool corpus_is_current(const fs::path& dir, std::size_t speakers, std::size_t utts, std::uint64_t seed) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) return false;
  try {
    const CorpusManifest m = read_corpus_manifest(manifest);
    if (m.seed != seed || m.speakers.size() != speakers || m.utts_per_speaker != utts) return false;
    for (const auto& u : m.utterances)
      for (const auto& [rel, hash] : u.hashes)
        if (!fs::exists(m.resolve(rel)) || file_hash(m.resolve(rel)) != hash) return false;
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::vector<std::string> split_part(const SplitManifest& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  return s.test;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nasality speech-inversion toolkit"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "BLAS threads (1 keeps runs bitwise reproducible)")
      ->check(CLI::PositiveNumber);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the synthetic paired corpus");
  std::size_t n_speakers = 8, utts_per_speaker = 12;
  std::uint64_t synth_seed = 7;
  std::string synth_out;
  bool force = false;
  synth->add_option("--speakers", n_speakers)->check(CLI::Range(3, 1000));
  synth->add_option("--utts-per-speaker", utts_per_speaker)->check(CLI::Range(2, 100000));
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out", synth_out)->required();
  synth->add_flag("--force", force, "Regenerate even when the corpus is up to date");

  // extract
  auto* extract = app.add_subcommand("extract", "Compute a parameter trace from recordings");
  std::string kind, oral_path, nasal_path, egg_path, extract_out, extract_config;
  extract->add_option("--kind", kind)->required()->check(CLI::IsMember({"nasalance", "voicing", "app"}));
  extract->add_option("--oral", oral_path)->check(CLI::ExistingFile);
  extract->add_option("--nasal", nasal_path)->check(CLI::ExistingFile);
  extract->add_option("--egg", egg_path)->check(CLI::ExistingFile);
  extract->add_option("--out", extract_out)->required();
  extract->add_option("--config", extract_config)->check(CLI::ExistingFile);

  // dataset build
  auto* dataset = app.add_subcommand("dataset", "Prepared training data");
  dataset->require_subcommand(1);
  auto* dataset_build = dataset->add_subcommand("build", "Frontend + targets for every utterance");
  std::string ds_corpus, ds_out, ds_config;
  dataset_build->add_option("--corpus", ds_corpus)->required()->check(CLI::ExistingDirectory);
  dataset_build->add_option("--out", ds_out)->required();
  dataset_build->add_option("--config", ds_config)->check(CLI::ExistingFile);

  // train
  auto* train_cmd = app.add_subcommand("train", "Speaker-independent training trials");
  std::string tr_dataset, tr_corpus, tr_out, tr_config, tr_targets = "all", tr_splits;
  std::optional<std::uint64_t> tr_seed;
  std::optional<std::size_t> tr_epochs, tr_trials;
  std::size_t tr_train_speakers = 6;
  train_cmd->add_option("--dataset", tr_dataset)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--corpus", tr_corpus, "Corpus directory, used to draw the split")
      ->check(CLI::ExistingDirectory);
  train_cmd->add_option("--splits", tr_splits, "Existing split manifest")->check(CLI::ExistingFile);
  train_cmd->add_option("--targets", tr_targets)->check(CLI::IsMember({"nasalance", "all"}));
  train_cmd->add_option("--seed", tr_seed);
  train_cmd->add_option("--out", tr_out)->required();
  train_cmd->add_option("--config", tr_config)->check(CLI::ExistingFile);
  train_cmd->add_option("--epochs", tr_epochs)->check(CLI::PositiveNumber);
  train_cmd->add_option("--trials", tr_trials)->check(CLI::PositiveNumber);
  train_cmd->add_option("--train-speakers", tr_train_speakers)->check(CLI::PositiveNumber);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Per-utterance PPMC of a checkpoint");
  std::string ev_dataset, ev_checkpoint, ev_splits, ev_split = "test";
  bool ev_json = false, ev_oracle = false;
  eval_cmd->add_option("--dataset", ev_dataset)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--checkpoint", ev_checkpoint)->check(CLI::ExistingFile);
  eval_cmd->add_option("--splits", ev_splits)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", ev_split)->check(CLI::IsMember({"train", "val", "test"}));
  eval_cmd->add_flag("--json", ev_json);
  eval_cmd->add_flag("--oracle", ev_oracle, "Score the ground truth itself (pipeline check)");

  // validate-hsn
  auto* hsn = app.add_subcommand("validate-hsn", "Correlate nasalance with HSV brightness");
  std::string hsn_corpus, hsn_config;
  bool hsn_json = false;
  hsn->add_option("--corpus", hsn_corpus)->required()->check(CLI::ExistingDirectory);
  hsn->add_option("--config", hsn_config)->check(CLI::ExistingFile);
  hsn->add_flag("--json", hsn_json);

  // landmarks
  auto* lm = app.add_subcommand("landmarks", "Gesture onset/peak/offset of a trace");
  std::string lm_trace, lm_out, lm_against, lm_lags;
  lm->add_option("--trace", lm_trace)->required()->check(CLI::ExistingFile);
  lm->add_option("--out", lm_out)->required();
  lm->add_option("--against", lm_against, "Second trace for relative timing")->check(CLI::ExistingFile);
  lm->add_option("--lags", lm_lags, "Lag CSV output (with --against)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return 0;
    const CLI::App* sub = &app;
    while (!sub->get_subcommands().empty()) sub = sub->get_subcommands().front();
    std::cerr << sub->help();
    return kUsageError;
  }

  try {
    compute::set_threads(threads);

    if (*synth) {
      const fs::path out(synth_out);
      if (!force && corpus_is_current(out, n_speakers, utts_per_speaker, synth_seed)) {
        std::cerr << "corpus up to date\n";
      } else {
        const CorpusManifest m = build_corpus(n_speakers, utts_per_speaker, synth_seed, out);
        std::cerr << "wrote " << m.utterances.size() << " utterances\n";
      }
      std::cout << (out / "manifest.json").string() << "\n";
      return 0;
    }

    if (*extract) {
      const RunConfig cfg = load_config(extract_config);
      if (kind == "nasalance") {
        if (oral_path.empty() || nasal_path.empty())
          throw ConfigError("nasalance needs --oral and --nasal");
        const Extraction ex = compute_nasalance(read_wav(oral_path), read_wav(nasal_path), cfg.nasalance);
        write_trace_csv(extract_out, ex.trace);
        if (ex.diagnostics.dead_samples > 0)
          std::cerr << "warning: " << ex.diagnostics.dead_samples << " silent samples set to 0\n";
      } else if (kind == "voicing") {
        if (egg_path.empty()) throw ConfigError("voicing needs --egg");
        const Extraction ex = compute_voicing(read_wav(egg_path), cfg.nasalance);
        write_trace_csv(extract_out, ex.trace);
        if (ex.diagnostics.degenerate) std::cerr << "warning: EGG is silent; voicing set to -1\n";
      } else {
        if (oral_path.empty()) throw ConfigError("app needs --oral (and optionally --nasal)");
        const Signal oral = read_wav(oral_path);
        const Signal nasal = nasal_path.empty() ? oral : read_wav(nasal_path);
        const AppTraces t = app_surrogate(mix_and_resample(oral, nasal), cfg.nasalance.target_rate_hz);
        write_traces_csv(extract_out, {t.periodicity, t.aperiodicity, t.pitch});
      }
      return 0;
    }

    if (*dataset_build) {
      const RunConfig cfg = load_config(ds_config);
      const CorpusManifest m = read_corpus_manifest(fs::path(ds_corpus) / "manifest.json");
      const Dataset ds = build_dataset(m, cfg.nasalance);
      write_dataset(ds_out, ds);
      std::cerr << "prepared " << ds.utterances.size() << " utterances, " << ds.segment_count()
                << " segments\n";
      return 0;
    }

    if (*train_cmd) {
      RunConfig cfg = load_config(tr_config);
      if (tr_seed) cfg.train.seed = *tr_seed;
      if (tr_epochs) cfg.train.max_epochs = *tr_epochs;
      if (tr_trials) cfg.train.n_trials = *tr_trials;
      cfg.train.targets = parse_target_set(tr_targets);
      cfg.validate();

      SplitManifest split;
      if (!tr_splits.empty()) {
        split = read_split_manifest(tr_splits);
      } else {
        if (tr_corpus.empty()) throw ConfigError("train needs --corpus or --splits");
        const CorpusManifest m = read_corpus_manifest(fs::path(tr_corpus) / "manifest.json");
        split = make_splits(m, tr_train_speakers, cfg.train.seed);
      }
      const Dataset ds = read_dataset(tr_dataset);
      const fs::path out(tr_out);
      fs::create_directories(out);
      write_split_manifest(out / "splits.json", split);
      write_text_file(out / "config.json", cfg.to_text());

      TrialHooks hooks;
      hooks.on_start = [&](std::size_t i, std::uint64_t seed) {
        std::cerr << "trial " << i + 1 << "/" << cfg.train.n_trials << " (seed " << seed << ")\n";
      };
      hooks.on_epoch = [](const EpochRecord& e) {
        std::fprintf(stderr, "  epoch %zu  train %.5f  val %.5f  lr %.3g\n", e.epoch, e.train_loss,
                     e.val_loss, e.lr);
      };
      hooks.on_done = [&](std::size_t i, const TrainResult& r) {
        const fs::path dir = out / ("trial_" + std::to_string(i));
        fs::create_directories(dir);
        write_text_file(dir / "history.csv", history_csv(r.history));
        Tcn<float> best = r.model;
        save_checkpoint((dir / "model.vtck").string(), best);
      };
      const TrialReport rep = run_trials(cfg.train, cfg.model, split, ds, hooks);
      const std::string table = render_table({rep.summary});
      write_text_file(out / "report.txt", table);
      write_text_file(out / "report.json", render_json({rep.summary}));
      std::cout << table;
      return 0;
    }

    if (*eval_cmd) {
      const Dataset ds = read_dataset(ev_dataset);
      const SplitManifest split = read_split_manifest(ev_splits);
      const std::vector<std::string> ids = split_part(split, ev_split);
      EvalReport rep;
      if (ev_oracle) {
        const std::size_t n = ev_checkpoint.empty() ? kAllTargets : read_checkpoint_config(ev_checkpoint).n_targets;
        rep = evaluate(ds, ids, oracle_predictor(n), n, "oracle");
      } else {
        if (ev_checkpoint.empty()) throw ConfigError("eval needs --checkpoint (or --oracle)");
        rep = evaluate_model(ev_checkpoint, ids, ds);
      }
      std::cout << (ev_json ? render_json({rep.row}) : render_table({rep.row}));
      if (rep.skipped > 0) std::cerr << rep.skipped << " flat utterance traces skipped\n";
      return 0;
    }

    if (*hsn) {
      const RunConfig cfg = load_config(hsn_config);
      const CorpusManifest m = read_corpus_manifest(fs::path(hsn_corpus) / "manifest.json");
      const HsnValidation v = validate_corpus_hsv(m, cfg.nasalance);
      if (hsn_json) {
        nlohmann::ordered_json j;
        j["utterances"] = nlohmann::ordered_json::array();
        for (const auto& u : v.utterances)
          j["utterances"].push_back({{"id", u.id}, {"r", u.report.r}, {"p", u.report.p_proxy}, {"n", u.report.n}});
        j["mean_r"] = v.mean_r;
        std::cout << j.dump(2) << "\n";
      } else {
        for (const auto& u : v.utterances)
          std::printf("%s  r=%.4f  p=%.3g  n=%zu\n", u.id.c_str(), u.report.r, u.report.p_proxy, u.report.n);
        std::printf("mean r = %.4f over %zu utterances\n", v.mean_r, v.utterances.size());
      }
      return 0;
    }

    if (*lm) {
      const std::vector<Trace> traces = read_traces_csv(lm_trace);
      const auto events = detect_landmarks(traces.front());
      write_text_file(lm_out, landmarks_csv(events));
      if (!lm_against.empty()) {
        const auto other = detect_landmarks(read_traces_csv(lm_against).front());
        const std::string lags = lags_csv(relative_timing(events, other));
        if (lm_lags.empty()) std::cout << lags;
        else write_text_file(lm_lags, lags);
      }
      std::cerr << gesture_durations(events).size() << " gestures\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}
