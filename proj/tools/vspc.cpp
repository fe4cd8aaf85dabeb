// Copyright Contributors to the vspc project
// SPDX-License-Identifier: Apache-2.0

// vspc: generate synthetic clouds, benchmark one layer or a whole network,
// and profile kernel-map density. Reports are JSON (schema_version 1) unless
// --format table is given.
//
// Exit codes: 0 success, 1 usage or input error, 2 verification failure,
// 3 capacity error.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <tbb/global_control.h>

#include "vspc/network/report.hpp"
#include "vspc/vspc.hpp"

namespace {

using namespace vspc;
using nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitVerify = 2;
constexpr int kExitCapacity = 3;

/// max |a - b| / max(|b|, 1) over all entries.
double max_rel_err(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.rows != b.rows || a.channels != b.channels) return HUGE_VAL;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = std::abs(double{a.data[i]} - double{b.data[i]});
    worst = std::max(worst, d / std::max(std::abs(double{b.data[i]}), 1.0));
  }
  return worst;
}

struct Common {
  std::string format = "json";
  std::string report_path;
  std::uint64_t seed = 1;
  int threads = 0;
  int runs = 5;
  int warmup = 1;
};

struct PackFlags {
  std::string config;
  std::string bits;
  int word = 32;
  int margin = -1;  ///< -1: smallest margin the workload needs
  double grid = 1.0;
};

std::vector<long> parse_list(const std::string& s, const char* what) {
  std::vector<long> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stol(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      detail::fail(what, ": '", tok, "' is not an integer");
    }
  }
  return out;
}

/// Grid and pack spec from --config or the individual flags, with the
/// margin defaulting to `needed_margin`.
VoxelConfig voxel_config(const PackFlags& f, int needed_margin) {
  VoxelConfig cfg;
  if (!f.config.empty()) {
    cfg = load_voxel_config(f.config);
  } else {
    cfg.grid.grid_size = {f.grid, f.grid, f.grid};
    cfg.pack.word_width = f.word;
    if (!f.bits.empty()) {
      const auto b = parse_list(f.bits, "--bits");
      if (b.size() != 3) detail::fail("--bits needs three values x,y,z");
      cfg.pack.bits = {static_cast<int>(b[0]), static_cast<int>(b[1]), static_cast<int>(b[2])};
    } else if (f.word == 64) {
      cfg.pack.bits = {21, 21, 21};
    }
  }
  if (f.margin >= 0) cfg.pack.margin = f.margin;
  else cfg.pack.margin = std::max(cfg.pack.margin, needed_margin);
  cfg.pack.validate();
  return cfg;
}

void emit(const Common& c, const json& report, const std::string& table) {
  if (!c.report_path.empty()) {
    std::ofstream out(c.report_path);
    if (!out) detail::fail("cannot write ", c.report_path);
    out << report.dump(2) << '\n';
  }
  if (c.format == "table") std::cout << table;
  else std::cout << report.dump(2) << '\n';
}

json base_report(const char* command) { return {{"schema_version", kReportSchemaVersion}, {"command", command}}; }

TimingProtocol protocol(const Common& c) { return {c.warmup, c.runs}; }

// gen-synthetic

struct GenFlags {
  std::string kind = "plane";
  SyntheticParams params;
  std::string output;
  bool binary = false;
};

int cmd_gen_synthetic(const Common& c, GenFlags g) {
  g.params.seed = c.seed;
  const auto cloud = synthetic_cloud(parse_synthetic_kind(g.kind), g.params);
  write_point_cloud(g.output, cloud, g.binary);
  json r = base_report("gen-synthetic");
  r["kind"] = g.kind;
  r["voxels"] = cloud.points.size();
  r["channels"] = cloud.features.channels;
  r["output"] = g.output;
  std::ostringstream t;
  t << g.kind << ": " << cloud.points.size() << " voxels -> " << g.output << '\n';
  emit(c, r, t.str());
  return 0;
}

// bench-layer

struct LayerFlags {
  std::string input;
  std::string layer = "16,16,3";
  int stride = 1;
  std::string dataflow = "os";
  std::optional<int> t;
  std::string builder = "zdelta";
  std::string accumulation = "deterministic";
  bool verify = false;
  bool halve = false;
  bool multiply_sentinels = false;
  std::string dump_kmap;
};

struct Timed {
  LayerIndex index;
  FeatureMatrix features;
  std::int64_t build_ns = 0, post_ns = 0, feature_ns = 0;
};

template <PackWord Word>
int bench_layer(const Common& c, const LayerFlags& f, const PackFlags& pf) {
  const auto lv = parse_list(f.layer, "--layer");
  if (lv.size() != 3) detail::fail("--layer needs C_in,C_out,K");
  LayerSpec spec_l;
  spec_l.c_in = static_cast<std::size_t>(lv[0]);
  spec_l.c_out = static_cast<std::size_t>(lv[1]);
  spec_l.kernel_size = static_cast<int>(lv[2]);
  spec_l.layer_stride = f.stride;
  const auto net = NetworkSpec::build({spec_l});
  const auto& layer = net.layers[0];
  const auto cfg = voxel_config(pf, net.required_margin());
  check_network_packing(net, cfg.pack);

  const auto raw = read_point_cloud(f.input);
  if (raw.points.empty()) detail::fail(f.input, ": no voxels");
  const auto cloud = prepare_cloud<Word>(raw, cfg.grid, cfg.pack, layer.c_in, c.seed);
  const auto inputs = std::span<const PackedCoord<Word>>(cloud.coords);
  const auto outputs_store = closed_form_coords<Word>(inputs, cfg.pack, layer.out_depth);
  const auto outputs = std::span<const PackedCoord<Word>>(outputs_store);
  const auto w = random_weights(layer.kernel_size, layer.c_in, layer.c_out, c.seed, 1);

  FeatureOptions fopts;
  fopts.accumulation = f.accumulation == "atomic" ? Accumulation::Atomic : Accumulation::Deterministic;
  fopts.multiply_sentinels = f.multiply_sentinels;
  const int k = layer.kernel_size, step = layer.offset_step();

  std::vector<BuilderKind> builders;
  if (f.builder == "zdelta" || f.builder == "all") builders.push_back(BuilderKind::ZDelta);
  if (f.builder == "bsearch" || f.builder == "all") builders.push_back(BuilderKind::BSearch);

  std::vector<std::pair<std::string, DataflowPlan>> plans;
  json tuning;
  auto add_plan = [&](const std::string& df) {
    if (df == "os") plans.emplace_back(df, DataflowPlan::output_stationary(k, step));
    else if (df == "ws") plans.emplace_back(df, DataflowPlan::weight_stationary(k, step));
    else if (f.t) plans.emplace_back(df, DataflowPlan::from_threshold(k, step, *f.t));
    else {
      const TuneSample<Word> s{cloud.coords, outputs_store, cloud.features};
      const auto r = tune_threshold<Word>(layer, std::span<const TuneSample<Word>>(&s, 1), cfg.pack, w,
                                          protocol(c), {}, fopts);
      tuning = {{"candidates", r.candidates}, {"cost_ns", r.cost_ns}, {"t_selected", r.threshold}};
      plans.emplace_back(df, DataflowPlan::from_threshold(k, step, r.threshold));
    }
  };
  if (f.dataflow == "all") {
    for (const char* df : {"os", "ws", "hybrid"}) add_plan(df);
  } else {
    add_plan(f.dataflow);
  }

  std::optional<KernelMap> truth;
  std::optional<FeatureMatrix> reference;
  if (f.verify) {
    const auto offsets = enumerate_offsets(k, step);
    truth = build_kmap_bruteforce<Word>(inputs, outputs, offsets, cfg.pack);
    std::vector<VoxelCoord> in_v, out_v;
    for (auto p : inputs) in_v.push_back(unpack(p, cfg.pack));
    for (auto p : outputs) out_v.push_back(unpack(p, cfg.pack));
    reference = oracle::eval_eq2_direct(in_v, out_v, offsets, cloud.features, w);
  }

  json runs = json::array();
  std::ostringstream table;
  table << "layer C_in=" << layer.c_in << " C_out=" << layer.c_out << " K=" << k << " s_l=" << f.stride
        << "  voxels " << inputs.size() << " -> " << outputs.size() << '\n';
  table << std::left << std::setw(9) << "builder" << std::setw(8) << "flow" << std::setw(4) << "t"
        << std::setw(7) << "kdense" << std::setw(8) << "ksparse" << std::setw(14) << "build_ns"
        << std::setw(12) << "post_ns" << std::setw(14) << "feature_ns" << std::setw(14) << "bsearches"
        << "verify\n";
  bool all_ok = true;
  std::optional<DensityProfile> density;
  bool dumped = false;

  for (BuilderKind b : builders) {
    for (const auto& [df, plan] : plans) {
      IndexOptions io;
      io.builder = b;
      io.halve_submanifold = f.halve;
      Timed tm;
      tm.build_ns = median_ns([&] { tm.index = index_layer<Word>(layer, inputs, outputs, cfg.pack, plan, io); },
                              protocol(c));
      // index_layer times build and post separately; keep the last run's split
      // scaled to the median total.
      const double total = static_cast<double>(tm.index.build_ns + tm.index.post_ns);
      const double share = total > 0 ? static_cast<double>(tm.index.post_ns) / total : 0.0;
      tm.post_ns = static_cast<std::int64_t>(static_cast<double>(tm.build_ns) * share);
      tm.build_ns -= tm.post_ns;
      const KernelMap& map = *tm.index.map;
      tm.feature_ns = median_ns([&] { tm.features = compute_features(map, cloud.features, w, fopts); },
                                protocol(c));
      if (!density) density = analyze_density(map);
      if (!f.dump_kmap.empty() && !dumped) {
        std::ofstream out(f.dump_kmap);
        if (!out) detail::fail("cannot write ", f.dump_kmap);
        dump_kernel_map(out, map);
        dumped = true;
      }

      json run = {{"layer_id", 0},
                  {"builder", b == BuilderKind::ZDelta ? "zdelta" : "bsearch"},
                  {"dataflow", df},
                  {"layout", std::string(layout_tag(plan.layout()))},
                  {"map_build_ns", tm.build_ns},
                  {"post_ns", tm.post_ns},
                  {"feature_ns", tm.feature_ns},
                  {"bsearch_count", tm.index.stats.binary_search_count},
                  {"probe_count", tm.index.stats.probe_count},
                  {"max_unit_probes", tm.index.stats.max_unit_probes},
                  {"t_selected", plan.threshold},
                  {"kdense", plan.k_dense()},
                  {"ksparse", plan.k_sparse()},
                  {"map_bytes", tm.index.map_bytes},
                  {"checksum", hex64(tm.index.checksum)}};
      std::string verdict = "-";
      if (f.verify) {
        const bool maps_ok = same_mapping(map, *truth);
        const double err = max_rel_err(tm.features, *reference);
        const bool ok = maps_ok && err <= 1e-4;
        all_ok = all_ok && ok;
        run["verify"] = {{"maps_match", maps_ok}, {"features_max_rel_err", err}, {"ok", ok}};
        verdict = ok ? "ok" : "FAIL";
      }
      table << std::left << std::setw(9) << run["builder"].get<std::string>() << std::setw(8) << df
            << std::setw(4) << plan.threshold << std::setw(7) << plan.k_dense() << std::setw(8)
            << plan.k_sparse() << std::setw(14) << tm.build_ns << std::setw(12) << tm.post_ns
            << std::setw(14) << tm.feature_ns << std::setw(14) << tm.index.stats.binary_search_count
            << verdict << '\n';
      runs.push_back(run);
    }
  }

  json r = base_report("bench-layer");
  r["input"] = f.input;
  r["voxels"] = inputs.size();
  r["n_out"] = outputs.size();
  r["layer"] = {{"K", k}, {"C_in", layer.c_in}, {"C_out", layer.c_out}, {"s_l", f.stride}};
  r["pack"] = {{"bits", cfg.pack.bits}, {"word_width", cfg.pack.word_width}, {"margin", cfg.pack.margin}};
  r["runs"] = runs;
  if (density) r["density"] = to_json(*density);
  if (!tuning.is_null()) r["tuning"] = tuning;
  if (f.verify) r["verified"] = all_ok;
  emit(c, r, table.str());
  if (!all_ok) {
    std::cerr << "vspc: verification failed\n";
    return kExitVerify;
  }
  return 0;
}

// bench-network

struct NetFlags {
  std::string input;
  std::string net_path;
  std::string preset;
  std::size_t base = 16;
  std::string mode = "both";
  std::string builder = "zdelta";
  bool verify = false;
};

template <PackWord Word>
int bench_network(const Common& c, NetFlags f, const PackFlags& pf) {
  NetworkSpec net;
  std::string source;
  if (!f.net_path.empty()) {
    net = load_network(f.net_path);
    source = f.net_path;
  } else {
    const std::string p = f.preset.empty() ? "unet42" : f.preset;
    const std::size_t in_c = 4;
    if (p == "unet42") net = unet42(f.base, in_c);
    else if (p == "resnet21") net = resnet21(f.base, in_c);
    else detail::fail("unknown preset '", p, "' (unet42, resnet21)");
    source = "preset:" + p;
  }
  const auto cfg = voxel_config(pf, net.required_margin());
  check_network_packing(net, cfg.pack);
  const auto raw = read_point_cloud(f.input);
  if (raw.points.empty()) detail::fail(f.input, ": no voxels");
  const auto cloud = prepare_cloud<Word>(raw, cfg.grid, cfg.pack, net.layers[0].c_in, c.seed);
  const auto weights = network_weights(net, c.seed);

  ThresholdCache cache;
  RunOptions ro;
  ro.index.builder = f.builder == "bsearch" ? BuilderKind::BSearch : BuilderKind::ZDelta;
  tune_network<Word>(net, cloud, cfg.pack, weights, cache, protocol(c), ro.index);
  const auto plans = network_plans(net, &cache);

  std::vector<IndexingMode> modes;
  if (f.mode == "sequential" || f.mode == "both") modes.push_back(IndexingMode::Sequential);
  if (f.mode == "network-wide" || f.mode == "both") modes.push_back(IndexingMode::NetworkWide);

  std::vector<NetworkResult> results;
  for (auto m : modes) {
    // Median of the protocol over the whole run; keep the median run's report.
    std::vector<NetworkResult> reps;
    for (int i = 0; i < c.warmup; ++i) (void)run_network<Word>(net, cloud.coords, cloud.features, weights, cfg.pack, plans, m, ro);
    for (int i = 0; i < std::max(1, c.runs); ++i)
      reps.push_back(run_network<Word>(net, cloud.coords, cloud.features, weights, cfg.pack, plans, m, ro));
    std::sort(reps.begin(), reps.end(), [](const auto& a, const auto& b) {
      return a.report.indexing_ns() < b.report.indexing_ns();
    });
    results.push_back(std::move(reps[reps.size() / 2]));
  }

  json r = base_report("bench-network");
  r["network"] = {{"source", source}, {"layers", net.layers.size()}};
  r["voxels"] = cloud.coords.size();
  r["pack"] = {{"bits", cfg.pack.bits}, {"word_width", cfg.pack.word_width}, {"margin", cfg.pack.margin}};
  r["hardware_threads"] = std::thread::hardware_concurrency();
  json runs = json::array();
  for (const auto& res : results) runs.push_back(to_json(res.report));
  r["runs"] = runs;
  json tuned = json::object();
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    if (cache.contains(i)) tuned[std::to_string(i)] = cache.at(i);
  r["tuned_thresholds"] = tuned;

  bool consistent = true;
  std::ostringstream table;
  table << source << ": " << net.layers.size() << " layers, " << cloud.coords.size() << " voxels\n";
  for (const auto& res : results) {
    table << std::left << std::setw(14) << mode_tag(res.report.mode) << " indexing_ns "
          << std::setw(12) << res.report.indexing_ns() << " feature_ns " << std::setw(12)
          << res.report.feature_ns << " map_bytes " << res.report.total_map_bytes << '\n';
  }
  if (results.size() == 2) {
    const auto& a = results[0];
    const auto& b = results[1];
    bool checksums = a.report.layers.size() == b.report.layers.size();
    for (std::size_t i = 0; checksums && i < a.report.layers.size(); ++i)
      checksums = a.report.layers[i].checksum == b.report.layers[i].checksum;
    const bool features = a.features == b.features;
    const double ratio = b.report.indexing_ns() > 0
                             ? static_cast<double>(a.report.indexing_ns()) / static_cast<double>(b.report.indexing_ns())
                             : 0.0;
    r["checksums_equal"] = checksums;
    r["features_equal"] = features;
    r["indexing_ratio_sequential_over_network_wide"] = ratio;
    consistent = checksums && features;
    table << "checksums " << (checksums ? "equal" : "DIFFER") << ", features "
          << (features ? "equal" : "DIFFER") << ", indexing ratio " << std::fixed << std::setprecision(3)
          << ratio << '\n';
  }
  if (f.verify) {
    // Full network vs a chain of direct oracle evaluations.
    std::vector<VoxelCoord> v0;
    for (auto p : cloud.coords) v0.push_back(unpack(p, cfg.pack));
    std::map<int, std::vector<VoxelCoord>> at;
    auto coords = [&](int d) -> const std::vector<VoxelCoord>& {
      auto it = at.find(d);
      if (it == at.end()) {
        std::set<VoxelCoord> s;
        const std::int64_t st = std::int64_t{1} << d;
        for (const auto& v : v0)
          s.insert({static_cast<std::int32_t>(v.x / st * st), static_cast<std::int32_t>(v.y / st * st),
                    static_cast<std::int32_t>(v.z / st * st)});
        it = at.emplace(d, std::vector<VoxelCoord>(s.begin(), s.end())).first;
      }
      return it->second;
    };
    FeatureMatrix fcur = cloud.features;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      const auto& l = net.layers[i];
      fcur = oracle::eval_eq2_direct(coords(l.in_depth), coords(l.out_depth),
                                     enumerate_offsets(l.kernel_size, l.offset_step()), fcur, weights[i]);
    }
    double worst = 0;
    for (const auto& res : results) worst = std::max(worst, max_rel_err(res.features, fcur));
    r["verify"] = {{"features_max_rel_err", worst}, {"ok", worst <= 1e-4}};
    consistent = consistent && worst <= 1e-4;
    table << "verify vs oracle: max rel err " << worst << (worst <= 1e-4 ? " ok" : " FAIL") << '\n';
  }
  emit(c, r, table.str());
  if (!consistent) {
    std::cerr << "vspc: verification failed\n";
    return kExitVerify;
  }
  return 0;
}

// profile-density

struct DensityFlags {
  std::vector<std::string> inputs;
  std::string kernels = "3,5";
  std::string csv;
};

template <PackWord Word>
int profile_density(const Common& c, const DensityFlags& f, const PackFlags& pf) {
  const auto ks = parse_list(f.kernels, "--K");
  int needed = 0;
  for (long k : ks) {
    check_kernel_size(static_cast<int>(k), 1);
    needed = std::max(needed, static_cast<int>(k - 1) / 2);
  }
  const auto cfg = voxel_config(pf, needed);
  if (cfg.pack.margin < needed) detail::fail_capacity("pack margin ", cfg.pack.margin, " below the ", needed, " the kernels need");

  json profiles = json::array();
  std::ostringstream table, csv;
  csv << "input,K,l1,density\n";
  for (const auto& path : f.inputs) {
    const auto raw = read_point_cloud(path);
    if (raw.points.empty()) detail::fail(path, ": no voxels");
    const auto cloud = prepare_cloud<Word>(raw, cfg.grid, cfg.pack, 0, c.seed);
    const auto v = std::span<const PackedCoord<Word>>(cloud.coords);
    for (long kl : ks) {
      const int k = static_cast<int>(kl);
      const auto offs = enumerate_offsets(k, 1);
      const auto built = build_kmap_zdelta<Word>(v, v, offs, group_offsets(offs), cfg.pack,
                                                 DataflowPlan::output_stationary(k, 1));
      const auto p = analyze_density(built.map);
      auto pj = to_json(p);
      pj["input"] = path;
      pj["K"] = k;
      pj["voxels"] = v.size();
      profiles.push_back(pj);
      table << path << "  K=" << k << "  voxels=" << v.size() << '\n' << "  l1   density\n";
      for (std::size_t i = 0; i < p.l1_values.size(); ++i) {
        table << "  " << std::left << std::setw(5) << p.l1_values[i] << std::fixed << std::setprecision(4)
              << p.density[i] << '\n';
        csv << path << ',' << k << ',' << p.l1_values[i] << ',' << std::setprecision(6) << p.density[i] << '\n';
      }
    }
  }
  if (!f.csv.empty()) {
    std::ofstream out(f.csv);
    if (!out) detail::fail("cannot write ", f.csv);
    out << csv.str();
  }
  json r = base_report("profile-density");
  r["profiles"] = profiles;
  emit(c, r, table.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vspc: voxel sparse-convolution engine harness"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  PackFlags pack;

  app.add_option("--format", common.format, "Output format")->check(CLI::IsMember({"json", "table"}));
  app.add_option("--report", common.report_path, "Also write the JSON report to this file");
  app.add_option("--seed", common.seed, "Seed for generated data and weights");
  auto* threads_opt = app.add_option("--threads", common.threads,
                                     "Worker threads (default: $VSPC_THREADS, else hardware parallelism)")
                          ->check(CLI::NonNegativeNumber);
  app.add_option("--runs", common.runs, "Timed runs per measurement (median reported)")->check(CLI::PositiveNumber);
  app.add_option("--warmup", common.warmup, "Discarded warm-up runs")->check(CLI::NonNegativeNumber);

  auto add_pack = [&](CLI::App* sub) {
    auto* cfg = sub->add_option("--config", pack.config, "Voxel config file (grid_size, range, bits, word_width, margin)")
                    ->check(CLI::ExistingFile);
    auto* bits = sub->add_option("--bits", pack.bits, "Per-axis field widths x,y,z");
    auto* word = sub->add_option("--word", pack.word, "Packed word width")->check(CLI::IsMember({32, 64}));
    auto* grid = sub->add_option("--grid", pack.grid, "Voxel size in input units")->check(CLI::PositiveNumber);
    sub->add_option("--margin", pack.margin, "Pack margin in voxels (default: what the kernels need)")
        ->check(CLI::NonNegativeNumber);
    cfg->excludes(bits)->excludes(word)->excludes(grid);
  };

  GenFlags gen;
  auto* g = app.add_subcommand("gen-synthetic", "Write a synthetic cloud");
  g->add_option("--kind", gen.kind, "plane | sphere | random | wall")
      ->check(CLI::IsMember({"plane", "sphere", "random", "wall"}));
  g->add_option("--size", gen.params.size, "Plane/wall side, random cube extent");
  g->add_option("--height", gen.params.height, "Wall height");
  g->add_option("--radius", gen.params.radius, "Sphere radius");
  g->add_option("--count", gen.params.count, "Random voxel count");
  g->add_option("--channels", gen.params.channels, "Feature channels per point");
  g->add_option("-o,--output", gen.output, "Output file")->required();
  g->add_flag("--binary", gen.binary, "Write the SPC1 binary format");

  LayerFlags lf;
  std::string t_text;
  auto* bl = app.add_subcommand("bench-layer", "Benchmark one SpC layer");
  bl->add_option("--input", lf.input, "Point cloud file")->required()->check(CLI::ExistingFile);
  bl->add_option("--layer", lf.layer, "C_in,C_out,K");
  bl->add_option("--stride", lf.stride, "Layer stride s_l (power of two)");
  auto* df = bl->add_option("--dataflow", lf.dataflow, "os | ws | hybrid | all")
                 ->check(CLI::IsMember({"os", "ws", "hybrid", "all"}));
  auto* topt = bl->add_option("--t", t_text, "Hybrid L1 threshold (omit to tune)");
  bl->add_option("--builder", lf.builder, "zdelta | bsearch | all")
      ->check(CLI::IsMember({"zdelta", "bsearch", "all"}));
  bl->add_option("--accumulation", lf.accumulation, "deterministic | atomic")
      ->check(CLI::IsMember({"deterministic", "atomic"}));
  bl->add_flag("--verify", lf.verify, "Cross-check maps and features against the oracles");
  bl->add_flag("--halve", lf.halve, "Store half of each symmetric submanifold map");
  bl->add_flag("--multiply-sentinels", lf.multiply_sentinels, "Multiply zero rows for OS sentinels");
  bl->add_option("--dump-kmap", lf.dump_kmap, "Write the kernel map in the text dump format");
  add_pack(bl);
  (void)df;
  (void)topt;

  NetFlags nf;
  auto* bn = app.add_subcommand("bench-network", "Run a network in sequential and network-wide indexing modes");
  bn->add_option("--input", nf.input, "Point cloud file")->required()->check(CLI::ExistingFile);
  auto* netp = bn->add_option("--net", nf.net_path, "Network spec file")->check(CLI::ExistingFile);
  auto* pre = bn->add_option("--preset", nf.preset, "unet42 | resnet21")->check(CLI::IsMember({"unet42", "resnet21"}));
  netp->excludes(pre);
  bn->add_option("--base", nf.base, "Base channel count for presets");
  bn->add_option("--mode", nf.mode, "sequential | network-wide | both")
      ->check(CLI::IsMember({"sequential", "network-wide", "both"}));
  bn->add_option("--builder", nf.builder, "zdelta | bsearch")->check(CLI::IsMember({"zdelta", "bsearch"}));
  bn->add_flag("--verify", nf.verify, "Cross-check final features against a chain of oracle layers");
  add_pack(bn);

  DensityFlags dfl;
  auto* pd = app.add_subcommand("profile-density", "Kernel-map column density by offset L1 norm");
  pd->add_option("--input", dfl.inputs, "Point cloud file(s)")->required()->check(CLI::ExistingFile);
  pd->add_option("--K", dfl.kernels, "Kernel sizes, comma separated");
  pd->add_option("--csv", dfl.csv, "Also write l1,density rows as CSV");
  add_pack(pd);

  try {
    app.parse(argc, argv);
    if (!t_text.empty()) {
      const auto tv = parse_list(t_text, "--t");
      if (tv.size() != 1) throw CLI::ValidationError("--t", "needs one integer");
      if (lf.dataflow != "hybrid" && lf.dataflow != "all")
        throw CLI::ValidationError("--t", "only applies to --dataflow hybrid or all");
      lf.t = static_cast<int>(tv[0]);
    }
    if (threads_opt->count() == 0) {
      if (const char* env = std::getenv("VSPC_THREADS"); env && *env) {
        const auto tv = parse_list(env, "VSPC_THREADS");
        if (tv.size() != 1 || tv[0] < 0) throw CLI::ValidationError("VSPC_THREADS", "needs one non-negative integer");
        common.threads = static_cast<int>(tv[0]);
      }
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const vspc::Error& e) {
    std::cerr << "vspc: " << e.what() << '\n';
    return kExitUsage;
  }

  std::unique_ptr<tbb::global_control> threads;
  if (common.threads > 0)
    threads = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism,
                                                    static_cast<std::size_t>(common.threads));

  try {
    if (*g) return cmd_gen_synthetic(common, gen);
    const bool wide = pack.word == 64 || (!pack.config.empty() && load_voxel_config(pack.config).pack.word_width == 64);
    if (*bl) return wide ? bench_layer<std::uint64_t>(common, lf, pack) : bench_layer<std::uint32_t>(common, lf, pack);
    if (*bn) return wide ? bench_network<std::uint64_t>(common, nf, pack) : bench_network<std::uint32_t>(common, nf, pack);
    if (*pd) return wide ? profile_density<std::uint64_t>(common, dfl, pack) : profile_density<std::uint32_t>(common, dfl, pack);
  } catch (const vspc::Error& e) {
    std::cerr << "vspc: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::Capacity: return kExitCapacity;
      case ErrorKind::Verification: return kExitVerify;
      default: return kExitUsage;
    }
  } catch (const std::exception& e) {
    std::cerr << "vspc: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
