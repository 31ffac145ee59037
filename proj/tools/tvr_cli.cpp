// Command-line front end: synthetic data, training, evaluation, ablations and
// diagnostics. Exit codes: 0 success, 1 usage, 2 data error, 3 divergence.
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "tvr/core/error.hpp"
#include "tvr/eval/retrieval.hpp"
#include "tvr/io/dataset.hpp"
#include "tvr/train/ablation.hpp"
#include "tvr/train/checkpoint.hpp"
#include "tvr/train/diagnostics.hpp"
#include "tvr/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace tvr;

namespace {

struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  std::int64_t seed = -1;
  std::string out;
};

RunConfig resolve_config(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_config(f.config);
  cfg = with_overrides(cfg, f.sets);
  if (f.seed >= 0) cfg.seed = static_cast<std::uint64_t>(f.seed);
  return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& f, bool need_out) {
  cmd->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--set", f.sets, "Override a config key, e.g. --set loss.kind=sigmoid");
  cmd->add_option("--seed", f.seed, "Run seed (overrides train.seed)");
  auto* out = cmd->add_option("--out", f.out, "Output path");
  if (need_out) out->required();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int run_sample_ebm(const std::string& checkpoint, const CommonFlags& flags, std::size_t chains, int bins) {
  std::unique_ptr<Model> owned;
  RunConfig cfg;
  ReplayBuffer buffer;
  if (!checkpoint.empty()) {
    LoadedCheckpoint ck = load_checkpoint(checkpoint);
    owned = std::move(ck.model);
    cfg = ck.state.config;
    buffer = std::move(ck.state.buffer);
  } else {
    cfg = resolve_config(flags);
    owned = std::make_unique<Model>(model_config(cfg));
    buffer = ReplayBuffer(cfg.eam.buffer_capacity, cfg.eam.reuse_prob);
  }
  if (flags.seed >= 0) cfg.seed = static_cast<std::uint64_t>(flags.seed);
  EnergyGradFn fn = model_energy_fn(owned->energy(), &owned->fusion());
  const LangevinOptions lopts = langevin_options(cfg);
  nlohmann::json trajectories = nlohmann::json::array();
  std::vector<double> finals;
  for (std::size_t c = 0; c < chains; ++c) {
    Rng rng(derive_seed(cfg.seed, 0x5a, c));
    ReplayBuffer::Draw d = buffer.draw_init(rng, cfg.frames, cfg.dim);
    std::vector<double> trace;
    ChainSample s = langevin_sample(fn, d.init, lopts, rng, &trace);
    trace.push_back(fn(s.text, s.frames).energy);
    finals.push_back(trace.back());
    trajectories.push_back({{"chain", c}, {"reused_text", d.reused_text}, {"reused_frames", d.reused_frames},
                            {"energy", trace}});
  }
  const auto [lo_it, hi_it] = std::minmax_element(finals.begin(), finals.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (double e : finals) {
    auto b = hi > lo ? static_cast<std::size_t>((e - lo) / (hi - lo) * bins) : 0;
    counts[std::min<std::size_t>(b, counts.size() - 1)]++;
  }
  nlohmann::json report = {{"chains", chains},
                           {"steps", lopts.steps},
                           {"eta", lopts.step_size},
                           {"sigma2", lopts.noise_var},
                           {"histogram", {{"min", lo}, {"max", hi}, {"counts", counts}}},
                           {"trajectories", trajectories}};
  if (!flags.out.empty()) write_text(flags.out, report.dump(2) + "\n");
  std::cout << "final energy range [" << lo << ", " << hi << "] over " << chains << " chains\n";
  for (int b = 0; b < bins; ++b) {
    const double left = lo + (hi - lo) * b / bins;
    std::cout << "  " << left << "\t" << std::string(counts[static_cast<std::size_t>(b)], '#') << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Text-video matching engine over pre-extracted embeddings"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth-data", "Write a synthetic embedding dataset");
  SynthOptions so;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Dataset path")->required();
  synth->add_option("--pairs", so.pairs, "Number of text-video pairs");
  synth->add_option("--dim", so.dim, "Embedding width");
  synth->add_option("--frames", so.frames, "Frames per video");
  synth->add_option("--noise", so.noise, "Per-frame and text noise scale");
  synth->add_option("--drift", so.drift, "Temporal drift magnitude");
  synth->add_option("--seed", so.seed, "Generator seed");
  synth->add_option("--split", so.split, "Split label");

  CommonFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_common(train_cmd, train_flags, true);
  bool verbose = false;
  train_cmd->add_flag("-v,--verbose", verbose, "Print per-epoch progress");

  auto* eval_cmd = app.add_subcommand("evaluate", "Score a dataset with a checkpoint");
  std::string ckpt_path, data_path, eval_out, eval_config;
  std::int64_t eval_seed = -1;
  eval_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", data_path, "Dataset file")->required();
  eval_cmd->add_option("--seed", eval_seed, "Evaluation sampling seed (default from checkpoint config)");
  eval_cmd->add_option("--config", eval_config, "Config whose hash is compared against the checkpoint")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval_out, "JSON report path");

  CommonFlags abl_flags;
  auto* abl_cmd = app.add_subcommand("ablate", "Train and compare model variants");
  add_common(abl_cmd, abl_flags, false);
  std::string variants_arg, seeds_arg = "0";
  abl_cmd->add_option("--variants", variants_arg, "Comma-separated variant names");
  abl_cmd->add_option("--seeds", seeds_arg, "Comma-separated seeds");

  CommonFlags ebm_flags;
  auto* ebm_cmd = app.add_subcommand("sample-ebm", "Run Langevin chains and report energies");
  add_common(ebm_cmd, ebm_flags, false);
  std::string ebm_ckpt;
  std::size_t chains = 64;
  int bins = 10;
  ebm_cmd->add_option("--checkpoint", ebm_ckpt, "Checkpoint providing energy parameters and buffer");
  ebm_cmd->add_option("--chains", chains, "Number of chains")->check(CLI::PositiveNumber);
  ebm_cmd->add_option("--bins", bins, "Histogram bins")->check(CLI::PositiveNumber);

  auto* gc_cmd = app.add_subcommand("grad-check", "Finite-difference check of every loss path on a tiny model");
  std::string gc_path = "all";
  std::uint64_t gc_seed = 0;
  gc_cmd->add_option("--path", gc_path, "Loss path or 'all'");
  gc_cmd->add_option("--seed", gc_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      EmbeddingDataset ds = synth_generate(so);
      write_dataset(ds, synth_out);
      std::cout << "wrote " << ds.size() << " pairs (d=" << ds.dim << ", M=" << ds.frames_per_video << ") to "
                << synth_out << '\n';
      return 0;
    }
    if (train_cmd->parsed()) {
      RunConfig cfg = resolve_config(train_flags);
      TrainOptions topts;
      topts.out_dir = train_flags.out;
      topts.verbose = verbose;
      TrainResult r;
      try {
        r = train(cfg, topts);
      } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "; last good checkpoint kept in " << train_flags.out << '\n';
        return 3;
      }
      if (r.best_val) std::cout << format_table(*r.best_val);
      std::cout << "trained " << r.total_steps << " steps; outputs in " << train_flags.out << '\n';
      return 0;
    }
    if (eval_cmd->parsed()) {
      LoadedCheckpoint ck = load_checkpoint(ckpt_path);
      if (!eval_config.empty()) {
        const RunConfig other = load_config(eval_config);
        if (config_hash(other) != ck.state.config_hash)
          std::cerr << "warning: config hash differs from the checkpoint's\n";
      }
      const std::uint64_t seed = eval_seed >= 0 ? static_cast<std::uint64_t>(eval_seed) : ck.state.config.eval_seed;
      const EmbeddingDataset data = load_dataset(data_path);
      const RetrievalMetrics m = evaluate(*ck.model, data, seed);
      std::cout << format_table(m);
      if (!eval_out.empty()) write_text(eval_out, to_json(m).dump(2) + "\n");
      return 0;
    }
    if (abl_cmd->parsed()) {
      RunConfig cfg = resolve_config(abl_flags);
      if (cfg.data.train.empty()) throw InvalidArgument("data.train is required");
      const EmbeddingDataset train_set = load_dataset(cfg.data.train);
      const std::string eval_path = !cfg.data.test.empty() ? cfg.data.test : cfg.data.val;
      if (eval_path.empty()) throw InvalidArgument("ablation needs data.val or data.test");
      const EmbeddingDataset eval_set = load_dataset(eval_path);
      std::vector<std::uint64_t> seeds;
      for (const std::string& s : split_list(seeds_arg)) seeds.push_back(std::stoull(s));
      AblationReport rep = ablate(cfg, split_list(variants_arg), seeds, train_set, eval_set, true);
      std::cout << rep.table();
      if (!abl_flags.out.empty()) write_text(abl_flags.out, rep.to_json().dump(2) + "\n");
      return 0;
    }
    if (ebm_cmd->parsed()) return run_sample_ebm(ebm_ckpt, ebm_flags, chains, bins);
    if (gc_cmd->parsed()) {
      const std::vector<std::string> paths =
          gc_path == "all" ? grad_check_paths() : std::vector<std::string>{gc_path};
      bool ok = true;
      for (const std::string& p : paths) {
        const GradCheckReport r = grad_check_path(p, gc_seed);
        std::cout << (r.passed ? "PASS " : "FAIL ") << p << "  max rel error " << r.max_rel_error << " over "
                  << r.checked << " entries (worst " << r.worst_param << "[" << r.worst_index << "])\n";
        ok = ok && r.passed;
      }
      return ok ? 0 : 3;
    }
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
