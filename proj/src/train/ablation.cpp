#include "tvr/train/ablation.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "tvr/core/error.hpp"

namespace tvr {

const std::vector<std::string>& known_variants() {
  static const std::vector<std::string> names = {
      "full",          "no-frl",          "no-eam",         "ce-loss",      "sigmoid-loss", "energy-cossim",
      "energy-bilinear", "energy-mlp",    "pooling-avg",    "pooling-max",  "pooling-min",  "pooling-global",
      "gat",           "no-f2f",          "fused-v-energy"};
  return names;
}

std::vector<std::string> variant_overrides(const std::string& name) {
  if (name == "full") return {};
  if (name == "no-frl") return {"frl.enabled=false"};
  if (name == "no-eam") return {"eam.enabled=false"};
  if (name == "ce-loss") return {"loss.kind=ce"};
  if (name == "sigmoid-loss") return {"loss.kind=sigmoid"};
  if (name == "gat") return {"frl.graph=gat"};
  if (name == "no-f2f") return {"frl.drop_f2f=true"};
  if (name == "fused-v-energy") return {"eam.pooling=global"};
  if (name.rfind("energy-", 0) == 0) {
    const std::string e = name.substr(7);
    if (e == "cossim" || e == "bilinear" || e == "mlp") return {"eam.energy=" + e};
  }
  if (name.rfind("pooling-", 0) == 0) {
    const std::string p = name.substr(8);
    if (p == "avg" || p == "max" || p == "min" || p == "global") return {"eam.pooling=" + p};
  }
  throw InvalidArgument("unknown variant '" + name + "'");
}

AblationReport ablate(const RunConfig& base, const std::vector<std::string>& variants,
                      const std::vector<std::uint64_t>& seeds, const EmbeddingDataset& train_set,
                      const EmbeddingDataset& eval_set, bool verbose) {
  std::vector<std::string> order{"full"};
  for (const std::string& v : variants) {
    variant_overrides(v);
    if (std::find(order.begin(), order.end(), v) == order.end()) order.push_back(v);
  }
  if (seeds.empty()) throw InvalidArgument("ablation needs at least one seed");
  AblationReport report;
  for (const std::string& v : order) {
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = with_overrides(base, variant_overrides(v));
      cfg.seed = seed;
      TrainResult r = train(cfg, train_set, nullptr);
      VariantRun run;
      run.variant = v;
      run.seed = seed;
      run.metrics = evaluate(*r.model, eval_set, cfg.eval_seed);
      run.energy = energy_statistics(*r.model, eval_set);
      run.sampler_invocations = r.sampler_invocations;
      if (verbose)
        std::fprintf(stderr, "%-16s seed %-4llu t2v R@1 %6.2f Rsum %6.2f\n", v.c_str(),
                     static_cast<unsigned long long>(seed), run.metrics.t2v.r1, run.metrics.t2v.rsum);
      report.runs.push_back(std::move(run));
    }
  }
  return report;
}

nlohmann::json AblationReport::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const VariantRun& r : runs)
    j.push_back({{"variant", r.variant},
                 {"seed", r.seed},
                 {"metrics", tvr::to_json(r.metrics)},
                 {"energy_matched", r.energy.matched_mean},
                 {"energy_mismatched", r.energy.mismatched_mean},
                 {"sampler_invocations", r.sampler_invocations}});
  return j;
}

std::string AblationReport::table() const {
  struct Acc {
    double r1 = 0, r5 = 0, r10 = 0, mdr = 0, mnr = 0, rsum = 0, v2t_rsum = 0;
    int n = 0;
    std::string seeds;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> acc;
  for (const VariantRun& r : runs) {
    if (acc.find(r.variant) == acc.end()) order.push_back(r.variant);
    Acc& a = acc[r.variant];
    a.r1 += r.metrics.t2v.r1;
    a.r5 += r.metrics.t2v.r5;
    a.r10 += r.metrics.t2v.r10;
    a.mdr += r.metrics.t2v.median_rank;
    a.mnr += r.metrics.t2v.mean_rank;
    a.rsum += r.metrics.t2v.rsum;
    a.v2t_rsum += r.metrics.v2t.rsum;
    ++a.n;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%.1f", a.seeds.empty() ? "" : " ", r.metrics.t2v.rsum);
    a.seeds += buf;
  }
  std::string out = "variant            R@1     R@5    R@10    MdR     MnR    Rsum  v2t Rsum  per-seed Rsum\n";
  char line[256];
  for (const std::string& v : order) {
    const Acc& a = acc[v];
    const double n = a.n;
    std::snprintf(line, sizeof line, "%-16s %6.2f  %6.2f  %6.2f  %5.1f  %6.2f  %6.2f  %8.2f  %s\n", v.c_str(), a.r1 / n,
                  a.r5 / n, a.r10 / n, a.mdr / n, a.mnr / n, a.rsum / n, a.v2t_rsum / n, a.seeds.c_str());
    out += line;
  }
  return out;
}

}  // namespace tvr
