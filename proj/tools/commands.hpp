#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mvflow {

struct CommonOptions {
  std::string preset = "semantickitti";
  std::string config;  // JSON file, optional
  std::string out = "out";
  int jobs = 1;
};

struct SynthOptions {
  int count = 1;
  std::uint64_t seed = 0;
  double dropout = -1.0;  // < 0 keeps the config value
};

struct ProjectOptions {
  std::vector<std::string> scans;
  std::string view = "rv";
  std::string variant = "scanunfold";
  bool plot = false;
};

struct FlowOptions {
  std::string scan;
  std::uint64_t seed = 0;
  std::string params;
  std::string scales = "1";
  std::string variant = "scanunfold";
  std::string gate = "softmax";
  int channels = 32;
  bool zero_attention = false;
};

struct EvalOptions {
  std::vector<std::string> pred;
  std::vector<std::string> gt;
  std::vector<std::string> scores;
  std::string classmap;  // preset name or JSON file; empty -> config/preset
  bool plot = false;
};

struct BenchOptions {
  int scans = 1;
  int repeat = 5;
  std::uint64_t seed = 0;
  int channels = 32;
  std::string head = "kpconv";
  std::string variant = "scanunfold";
};

struct FuseOptions {
  std::string scan;
  std::string labels;
  std::string head = "kpconv";
  int k = 5;
  double cutoff = 1.0;
  std::string lambda = "2,2,2,1,1";
  std::uint64_t seed = 0;
  std::string params;
  double noise = 0.5;
  std::string variant = "scanunfold";
};

int run_synth(const CommonOptions& common, const SynthOptions& opt);
int run_project(const CommonOptions& common, const ProjectOptions& opt);
int run_flow(const CommonOptions& common, const FlowOptions& opt);
int run_eval(const CommonOptions& common, const EvalOptions& opt);
int run_bench(const CommonOptions& common, const BenchOptions& opt);
int run_fuse(const CommonOptions& common, const FuseOptions& opt);

}  // namespace mvflow
