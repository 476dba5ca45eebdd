// SPDX-License-Identifier: Apache-2.0
#include "flutesim/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <ostream>
#include <sstream>
#include <string>

#include "flutesim/bank_model.hpp"
#include "flutesim/engine.hpp"
#include "flutesim/errors.hpp"
#include "flutesim/flte.hpp"
#include "flutesim/presets.hpp"
#include "flutesim/raw_io.hpp"

namespace flutesim {
namespace {

std::uint64_t default_seed() {
  if (const char* env = std::getenv("FLUTE_SIM_SEED")) {
    return std::strtoull(env, nullptr, 0);
  }
  return 1;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

// Rebuilds the binary32 NormalFloat table for the file's bit width and checks
// the stored binary16 table matches it.
LookupTable rebuild_table(const FlteModel& model) {
  LookupTable table = build_nf_table(model.cfg.bits);
  for (std::size_t i = 0; i < model.table.size(); ++i) {
    if (f32_to_f16(table.values[i]) != model.table[i]) {
      throw InputError("flte table entry " + std::to_string(i) +
                       " is not a NormalFloat quantile");
    }
  }
  return table;
}

QuantizedMatrix reconstruct(const FlteModel& model) {
  QuantizedMatrix q;
  q.cfg = model.cfg;
  q.k = model.k;
  q.n = model.n;
  q.table = rebuild_table(model);
  q.scales = model.scales;
  q.indices = unpack_matrix(model.packed());
  return q;
}

void print_traffic_csv(std::ostream& out, const TrafficStats& t) {
  out << "bytes_weights,bytes_scales,bytes_table,bytes_activations,"
         "bytes_partials_rw,bytes_output,flops,arithmetic_intensity\n";
  out << t.bytes_weights << ',' << t.bytes_scales << ',' << t.bytes_table << ','
      << t.bytes_activations << ',' << t.bytes_partials_rw << ','
      << t.bytes_output << ',' << t.flops << ',' << t.arithmetic_intensity()
      << '\n';
}

struct LayoutFlags {
  int tile_m = 16, tile_n = 64, tile_k = 64;
  int frag_m = 16, frag_n = 8, frag_k = 16;

  void attach(CLI::App* app) {
    app->add_option("--tile-m", tile_m, "Tile rows (M)");
    app->add_option("--tile-n", tile_n, "Tile columns (N)");
    app->add_option("--tile-k", tile_k, "Tile depth (K)");
    app->add_option("--frag-m", frag_m, "Fragment rows");
    app->add_option("--frag-n", frag_n, "Fragment columns");
    app->add_option("--frag-k", frag_k, "Fragment depth");
  }
  LayoutDescriptor layout() const {
    return {tile_m, tile_n, tile_k, frag_m, frag_n, frag_k};
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out) {
  CLI::App app{"Bit-exact model of a fused lookup-table dequantization matmul "
               "engine with NormalFloat quantization tooling"};
  app.require_subcommand(1);

  // ---- quantize ----
  auto* quantize = app.add_subcommand(
      "quantize", "Quantize a raw f32 matrix into a .flte container");
  struct {
    std::string input, output, calib;
    int k = 0, n = 0, bits = 4, group = 128;
    bool learn = false;
    int calib_rows = 0, steps = 50;
    double lr = 1e-3;
    LayoutFlags layout;
  } qz;
  quantize->add_option("--input", qz.input, "Raw f32 weights, k x n row-major")
      ->required();
  quantize->add_option("--k", qz.k, "Weight rows (quantized dim)")->required();
  quantize->add_option("--n", qz.n, "Weight columns")->required();
  quantize->add_option("--bits", qz.bits, "Index bits (2..4)");
  quantize->add_option("--group", qz.group, "Scale group size");
  quantize->add_option("--output", qz.output, "Output .flte path")->required();
  quantize->add_flag("--learn-scales", qz.learn,
                     "Refine scales on calibration data");
  quantize->add_option("--calib", qz.calib, "Raw f32 calibration matrix, m x k");
  quantize->add_option("--calib-rows", qz.calib_rows, "Calibration rows");
  quantize->add_option("--steps", qz.steps, "Gradient-descent steps");
  quantize->add_option("--lr", qz.lr, "Gradient-descent learning rate");
  qz.layout.attach(quantize);

  // ---- dequantize ----
  auto* dequantize = app.add_subcommand(
      "dequantize", "Expand a .flte container back to a raw f32 matrix");
  struct {
    std::string input, output;
  } dq;
  dequantize->add_option("--input", dq.input, ".flte path")->required();
  dequantize->add_option("--output", dq.output, "Raw f32 output path")
      ->required();

  // ---- matmul ----
  auto* matmul = app.add_subcommand(
      "matmul", "Y = X * dequantize(W) through the fused engine");
  struct {
    std::string weights, input, output, traffic_out;
    int m = 0, workers = 8, stages = 2, dup = 1, tile_m = 0;
    bool serial = false;
  } mm;
  matmul->add_option("--weights", mm.weights, ".flte path")->required();
  matmul->add_option("--input", mm.input, "Raw f16 activations, m x k")
      ->required();
  matmul->add_option("--m", mm.m, "Activation rows (batch)")->required();
  matmul->add_option("--output", mm.output, "Raw f16 output path")->required();
  matmul->add_option("--workers", mm.workers, "Simulated SM count");
  matmul->add_option("--stages", mm.stages, "Prefetch pipeline stages");
  matmul->add_option("--dup", mm.dup, "Lookup-table duplication factor");
  matmul->add_option("--tile-m", mm.tile_m, "Override the layout's tile_m");
  matmul->add_flag("--serial", mm.serial,
                   "Multiplex all workers on one thread");
  matmul->add_option("--traffic-out", mm.traffic_out,
                     "Write the traffic CSV here instead of stdout");

  // ---- traffic ----
  auto* traffic = app.add_subcommand(
      "traffic", "Traffic/flop accounting for a problem, without executing");
  struct {
    std::string weights;
    int m = 1, workers = 8, stages = 2, dup = 1, tile_m = 0;
  } tr;
  traffic->add_option("--weights", tr.weights, ".flte path")->required();
  traffic->add_option("--m", tr.m, "Activation rows (batch)");
  traffic->add_option("--workers", tr.workers, "Simulated SM count");
  traffic->add_option("--stages", tr.stages, "Prefetch pipeline stages");
  traffic->add_option("--dup", tr.dup, "Lookup-table duplication factor");
  traffic->add_option("--tile-m", tr.tile_m, "Override the layout's tile_m");

  // ---- schedule ----
  auto* schedule = app.add_subcommand(
      "schedule", "Stream-K worker ranges and per-tile roles as CSV");
  struct {
    int tiles_m = 1, tiles_n = 1, tiles_k = 1, workers = 1;
  } sc;
  schedule->add_option("--tiles-m", sc.tiles_m, "Output tile rows")->required();
  schedule->add_option("--tiles-n", sc.tiles_n, "Output tile columns")
      ->required();
  schedule->add_option("--tiles-k", sc.tiles_k, "K slices per output tile")
      ->required();
  schedule->add_option("--workers", sc.workers, "Worker count")->required();

  // ---- banks ----
  auto* banks = app.add_subcommand(
      "banks", "Monte-Carlo bank-conflict statistics as CSV");
  struct {
    std::vector<int> bits{3, 4};
    std::vector<int> dups{1, 2, 4, 8};
    int warps = 100000;
    std::uint64_t seed = default_seed();
    std::string pattern = "uniform";
  } bk;
  banks->add_option("--bits", bk.bits, "Bit widths to sweep");
  banks->add_option("--dups", bk.dups, "Duplication factors to sweep");
  banks->add_option("--warps", bk.warps, "Warps per configuration");
  banks->add_option("--seed", bk.seed, "RNG seed (default FLUTE_SIM_SEED)");
  banks->add_option("--pattern", bk.pattern,
                    "Lane index distribution: uniform | samebank")
      ->check(CLI::IsMember({"uniform", "samebank"}));

  // ---- bench ----
  auto* bench = app.add_subcommand(
      "bench", "Compression and balance analytics over a shape preset");
  struct {
    std::string preset = "llama3-8b";
    std::vector<int> batches{1, 4, 8, 16};
    std::vector<int> bits{4, 3};
    std::vector<int> groups{32, 64, 128, 256};
    int workers = 108;
    LayoutFlags layout;
  } bn;
  bench->add_option("--preset", bn.preset, "Shape preset name");
  bench->add_option("--batches", bn.batches, "Batch sizes (m)");
  bench->add_option("--bits", bn.bits, "Bit widths");
  bench->add_option("--groups", bn.groups, "Group sizes");
  bench->add_option("--workers", bn.workers, "Simulated SM count");
  bn.layout.attach(bench);

  // ---- sweep ----
  auto* sweep = app.add_subcommand(
      "sweep", "Enumerate tile/stage/dup configurations; report the best");
  struct {
    int m = 1, k = 0, n = 0, bits = 4, group = 128, workers = 8;
    int warps = 2000;
    std::uint64_t seed = default_seed();
  } sw;
  sweep->add_option("--m", sw.m, "Activation rows (batch)");
  sweep->add_option("--k", sw.k, "Weight rows")->required();
  sweep->add_option("--n", sw.n, "Weight columns")->required();
  sweep->add_option("--bits", sw.bits, "Index bits");
  sweep->add_option("--group", sw.group, "Scale group size");
  sweep->add_option("--workers", sw.workers, "Simulated SM count");
  sweep->add_option("--warps", sw.warps, "Warps for the bank-conflict column");
  sweep->add_option("--seed", sw.seed, "RNG seed (default FLUTE_SIM_SEED)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::stringstream msg;
    const int code = app.exit(e, msg, msg);
    out << msg.str();
    return code == 0 ? 0 : 1;
  }

  try {
    if (quantize->parsed()) {
      const MatF w = read_f32_raw(qz.input, qz.k, qz.n);
      const QuantConfig cfg{qz.bits, qz.group};
      QuantizedMatrix q;
      if (qz.learn) {
        if (qz.calib.empty() || qz.calib_rows < 1) {
          throw InputError(
              "--learn-scales needs --calib and --calib-rows");
        }
        const MatF x = read_f32_raw(qz.calib, qz.calib_rows, qz.k);
        q = refine_scales(w, x, cfg, qz.steps, qz.lr).quantized;
      } else {
        q = quantize_matrix(w, cfg);
      }
      const PackedWeights pw = reorder_and_split(q, qz.layout.layout());
      write_flte_file(qz.output, make_flte_model(q, pw));
      return 0;
    }

    if (dequantize->parsed()) {
      const FlteModel model = read_flte_file(dq.input);
      write_f32_raw(dq.output, dequantize_matrix(reconstruct(model)));
      return 0;
    }

    if (matmul->parsed()) {
      const FlteModel model = read_flte_file(mm.weights);
      const MatH x = read_f16_raw(mm.input, mm.m, model.k);
      const LookupTable table = rebuild_table(model);
      const VectorizedTable lut = make_vectorized_lut(table, mm.dup);
      const PackedWeights pw = model.packed();

      MatmulProblem problem;
      problem.x = &x;
      problem.weights = &pw;
      problem.scales = &model.scales;
      problem.lut = &lut;
      problem.cfg = model.cfg;
      problem.workers = mm.workers;
      problem.stages = mm.stages;
      problem.tile_m = mm.tile_m;
      problem.mode = mm.serial ? ExecMode::kSerial : ExecMode::kParallel;

      const MatmulResult result = execute(problem);
      write_f16_raw(mm.output, result.y);
      if (mm.traffic_out.empty()) {
        print_traffic_csv(out, result.stats);
      } else {
        std::ofstream f(mm.traffic_out);
        if (!f) throw InputError("cannot open '" + mm.traffic_out + "'");
        print_traffic_csv(f, result.stats);
      }
      return 0;
    }

    if (traffic->parsed()) {
      const FlteModel model = read_flte_file(tr.weights);
      ProblemShape shape;
      shape.m = tr.m;
      shape.k = model.k;
      shape.n = model.n;
      shape.cfg = model.cfg;
      shape.layout = model.layout;
      shape.workers = tr.workers;
      shape.stages = tr.stages;
      shape.dup = tr.dup;
      shape.tile_m = tr.tile_m;
      print_traffic_csv(out, plan_traffic(shape));
      return 0;
    }

    if (schedule->parsed()) {
      const TileGrid grid{sc.tiles_m, sc.tiles_n, sc.tiles_k};
      const StreamKPlan plan = plan_stream_k(grid, sc.workers);
      out << "worker,start_unit,end_unit,output_tiles_touched,role_per_tile\n";
      for (int w = 0; w < plan.workers; ++w) {
        const WorkerRange& r = plan.ranges[w];
        std::string roles;
        long touched = 0;
        if (r.size() > 0) {
          const long first_tile = r.begin / grid.tiles_k;
          const long last_tile = (r.end - 1) / grid.tiles_k;
          touched = last_tile - first_tile + 1;
          for (long t = first_tile; t <= last_tile; ++t) {
            const bool started = r.begin <= t * grid.tiles_k;
            const bool finished = r.end >= (t + 1) * grid.tiles_k;
            const char* role = started && finished ? "sole"
                               : started           ? "start"
                               : finished          ? "finish"
                                                   : "mid";
            roles += (roles.empty() ? "" : ";") + std::to_string(t) + ':' + role;
          }
        }
        out << w << ',' << r.begin << ',' << r.end << ',' << touched << ','
            << roles << '\n';
      }
      return 0;
    }

    if (banks->parsed()) {
      const WarpPattern pattern = bk.pattern == "uniform"
                                      ? WarpPattern::kUniform
                                      : WarpPattern::kSameBankColumn;
      out << "bits,dup,mean_degree,p99_degree,max_degree\n";
      for (const int bits : bk.bits) {
        for (const int dup : bk.dups) {
          const WarpStats s =
              monte_carlo_degree(bits, dup, bk.warps, bk.seed, pattern);
          out << bits << ',' << dup << ',' << s.mean_degree << ','
              << s.p99_degree << ',' << s.max_degree << '\n';
        }
      }
      return 0;
    }

    if (bench->parsed()) {
      const ShapePreset& preset = find_preset(bn.preset);
      out << "preset,m,n,k,bits,group,bits_per_param,traffic_ratio,"
             "streamk_imbalance,slicek_imbalance,slicek_waves\n";
      for (const int n : preset.n_list) {
        for (const int m : bn.batches) {
          for (const int bits : bn.bits) {
            for (const int group : bn.groups) {
              const QuantConfig cfg{bits, group};
              ProblemShape shape;
              shape.m = m;
              shape.k = preset.k;
              shape.n = n;
              shape.cfg = cfg;
              shape.layout = bn.layout.layout();
              shape.workers = bn.workers;
              const TrafficStats t = plan_traffic(shape);
              const double dense =
                  static_cast<double>(t.bytes_weights) * 16.0 / bits;
              const TileGrid grid{
                  (m + shape.layout.tile_m - 1) / shape.layout.tile_m,
                  n / shape.layout.tile_n, preset.k / shape.layout.tile_k};
              const BalanceMetrics sk =
                  balance_metrics(plan_stream_k(grid, bn.workers));
              const BalanceMetrics slk =
                  balance_metrics(plan_slice_k(grid, bn.workers));
              out << preset.name << ',' << m << ',' << n << ',' << preset.k
                  << ',' << bits << ',' << group << ',' << std::fixed
                  << std::setprecision(2) << round2(bits_per_param(cfg))
                  << std::defaultfloat << ',' << weight_traffic_ratio(t, dense)
                  << ',' << sk.imbalance << ',' << slk.imbalance << ','
                  << slk.waves << '\n';
            }
          }
        }
      }
      return 0;
    }

    if (sweep->parsed()) {
      const QuantConfig cfg{sw.bits, sw.group};
      cfg.validate(sw.k);
      struct Row {
        int tile_n, tile_k, stages, dup;
        std::uint64_t total_bytes;
        double mean_degree;
      };
      std::vector<Row> rows;
      for (const int tile_n : {16, 32, 64, 128}) {
        if (sw.n % tile_n != 0) continue;
        for (const int tile_k : {16, 32, 64, 128}) {
          if (sw.k % tile_k != 0) continue;
          if ((static_cast<long>(tile_n) * tile_k) % 32 != 0) continue;
          for (const int stages : {2, 3, 4}) {
            for (const int dup : {1, 2, 4, 8}) {
              ProblemShape shape;
              shape.m = sw.m;
              shape.k = sw.k;
              shape.n = sw.n;
              shape.cfg = cfg;
              shape.layout = LayoutDescriptor{16, tile_n, tile_k, 16, 8, 16};
              shape.workers = sw.workers;
              shape.stages = stages;
              shape.dup = dup;
              const TrafficStats t = plan_traffic(shape);
              const WarpStats ws = monte_carlo_degree(
                  sw.bits, dup, sw.warps, sw.seed, WarpPattern::kUniform);
              rows.push_back({tile_n, tile_k, stages, dup, t.total_bytes(),
                              ws.mean_degree});
            }
          }
        }
      }
      if (rows.empty()) {
        throw InputError("sweep: no tile configuration divides the dims");
      }
      // Traffic is dup-invariant, so conflicts break ties, then enumeration
      // order keeps the result deterministic.
      std::size_t best = 0;
      for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].total_bytes < rows[best].total_bytes ||
            (rows[i].total_bytes == rows[best].total_bytes &&
             rows[i].mean_degree < rows[best].mean_degree)) {
          best = i;
        }
      }
      out << "tile_m,tile_n,tile_k,stages,dup,total_bytes,mean_degree,best\n";
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const Row& r = rows[i];
        out << 16 << ',' << r.tile_n << ',' << r.tile_k << ',' << r.stages
            << ',' << r.dup << ',' << r.total_bytes << ',' << r.mean_degree
            << ',' << (i == best ? 1 : 0) << '\n';
      }
      return 0;
    }
  } catch (const OptimizationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace flutesim
