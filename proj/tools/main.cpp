// mvflow: batch front-end over the mvseg library.
//
// Exit codes: 0 success, 1 processing failure, 2 usage or configuration error.

#include "cli_support.hpp"
#include "commands.hpp"

#include <mvseg/errors.hpp>
#include <mvseg/parallel.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

void add_common(CLI::App* cmd, mvflow::CommonOptions& c) {
  cmd->add_option("--preset", c.preset, "sensor/grid/class preset: semantickitti or nuscenes")
      ->check(CLI::IsMember({"semantickitti", "nuscenes"}));
  cmd->add_option("--config", c.config, "JSON config: preset name plus overrides");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view lidar projection, geometric flow and evaluation toolkit"};
  app.require_subcommand(1);

  mvflow::CommonOptions common;

  mvflow::SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "write synthetic scans and label files");
  add_common(c_synth, common);
  c_synth->add_option("--count", synth.count, "number of scans");
  c_synth->add_option("--seed", synth.seed, "seed of the first scan");
  c_synth->add_option("--dropout", synth.dropout, "per-point dropout probability");

  mvflow::ProjectOptions project;
  auto* c_project = app.add_subcommand("project", "project scans to range-view or BEV rasters");
  add_common(c_project, common);
  c_project->add_option("scans", project.scans, "scan files")->required();
  c_project->add_option("--view", project.view, "rv or bev");
  c_project->add_option("--variant", project.variant, "RV rows: original or scanunfold");
  c_project->add_flag("--plot", project.plot, "also write PGM images");

  mvflow::FlowOptions flow;
  auto* c_flow = app.add_subcommand("flow", "run the bidirectional align-and-fuse step at several scales");
  add_common(c_flow, common);
  c_flow->add_option("scan", flow.scan, "scan file")->required();
  c_flow->add_option("--seed", flow.seed, "seed for features and attention weights");
  c_flow->add_option("--params", flow.params, "tensor-block file with rv/bev attention parameters");
  c_flow->add_option("--scales", flow.scales, "comma separated scales in (0, 1], e.g. 1,0.5,0.25,0.125");
  c_flow->add_option("--variant", flow.variant, "RV rows: original or scanunfold");
  c_flow->add_option("--gate", flow.gate, "attention gate: softmax or sigmoid");
  c_flow->add_option("--channels", flow.channels, "feature channels per view");
  c_flow->add_flag("--zero-attention", flow.zero_attention, "zero attention weights (fused = input)");

  mvflow::EvalOptions eval;
  auto* c_eval = app.add_subcommand("eval", "score predicted label files against ground truth");
  add_common(c_eval, common);
  c_eval->add_option("--pred", eval.pred, "predicted label files");
  c_eval->add_option("--gt", eval.gt, "ground-truth label files, paired in order");
  c_eval->add_option("--scores", eval.scores, "per-point probability rasters (N x 1 x C), paired in order");
  c_eval->add_option("--classmap", eval.classmap, "class map preset name or JSON file");
  c_eval->add_flag("--plot", eval.plot, "also write a confusion heatmap PGM");

  mvflow::BenchOptions bench;
  auto* c_bench = app.add_subcommand("bench", "time every pipeline stage on synthetic scans");
  add_common(c_bench, common);
  c_bench->add_option("--scans", bench.scans, "number of synthetic scans");
  c_bench->add_option("--repeat", bench.repeat, "timed runs per scan");
  c_bench->add_option("--seed", bench.seed, "seed for scans and parameters");
  c_bench->add_option("--channels", bench.channels, "feature channels per view");
  c_bench->add_option("--head", bench.head, "kpconv, knn or none");
  c_bench->add_option("--variant", bench.variant, "RV rows: original or scanunfold");

  mvflow::FuseOptions fuse;
  auto* c_fuse = app.add_subcommand("fuse", "fuse per-view scores at the points and report losses and metrics");
  add_common(c_fuse, common);
  c_fuse->add_option("scan", fuse.scan, "scan file")->required();
  c_fuse->add_option("--labels", fuse.labels, "label file of the scan")->required();
  c_fuse->add_option("--head", fuse.head, "kpconv or knn");
  c_fuse->add_option("--k", fuse.k, "neighbors for the knn head");
  c_fuse->add_option("--cutoff", fuse.cutoff, "range cutoff in meters for the knn head");
  c_fuse->add_option("--lambda", fuse.lambda, "loss weights a,b,c,d,e");
  c_fuse->add_option("--seed", fuse.seed, "seed for the synthetic view scores");
  c_fuse->add_option("--params", fuse.params, "tensor-block file with 'head' kernel point parameters");
  c_fuse->add_option("--noise", fuse.noise, "logit noise of the synthetic view scores");
  c_fuse->add_option("--variant", fuse.variant, "RV rows: original or scanunfold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? mvflow::kExitOk : mvflow::kExitUsage;
  }

  try {
    mvseg::set_num_jobs(common.jobs);
    if (c_synth->parsed()) return mvflow::run_synth(common, synth);
    if (c_project->parsed()) return mvflow::run_project(common, project);
    if (c_flow->parsed()) return mvflow::run_flow(common, flow);
    if (c_eval->parsed()) return mvflow::run_eval(common, eval);
    if (c_bench->parsed()) return mvflow::run_bench(common, bench);
    if (c_fuse->parsed()) return mvflow::run_fuse(common, fuse);
  } catch (const mvflow::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return mvflow::kExitUsage;
  } catch (const mvseg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return mvflow::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return mvflow::kExitFailure;
  }
  return mvflow::kExitUsage;
}
