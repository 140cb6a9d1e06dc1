#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nathist/compare.hpp"
#include "nathist/diagnostics.hpp"
#include "nathist/overdiagnosis.hpp"
#include "nathist/sampler.hpp"
#include "nathist/simulate.hpp"

namespace nathist::io {

// screens.csv: id,age,result  /  endpoints.csv: id,t_pc,censor_age
// (empty censor_age = observed clinical diagnosis). Every problem is
// reported with the offending record id or row number.
std::vector<IndividualRecord> load_cohort(const std::filesystem::path& screens,
                                          const std::filesystem::path& endpoints);

void write_cohort(const std::filesystem::path& screens,
                  const std::filesystem::path& endpoints,
                  const std::vector<IndividualRecord>& records);

void write_truth(const std::filesystem::path& path,
                 const std::vector<IndividualRecord>& records,
                 const std::vector<sim::History>& truth);

// long-format draw file: chain,iteration,parameter,value
void export_draws(const std::filesystem::path& path,
                  const std::vector<mcmc::DrawStore>& stores);
std::vector<mcmc::DrawStore> import_draws(const std::filesystem::path& path);

// per-individual latent draws (large; flag-gated):
// chain,iteration,id,onset_age,indolent
void export_latents(const std::filesystem::path& path,
                    const std::vector<mcmc::DrawStore>& stores,
                    const std::vector<IndividualRecord>& records);

// Run manifest: everything needed to reproduce the run bit-exactly.
struct RunManifest {
  std::uint64_t seed = 0;
  int chains = 1;
  int iterations = 0, warmup = 0, thin = 1;
  double t0 = 30.0, shape_h = 2.0, shape_prog = 2.0;
  PriorSpec prior;
  std::string config_text;  // resolved key=value configuration
  std::string config_hash;
  double wall_seconds = 0.0;
  std::vector<double> accept_h, accept_prog, accept_psi, accept_zhp;
  std::vector<double> eps_h, eps_prog, eps_psi;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

// A fitted run directory: manifest.json + draws.csv.
struct FittedRun {
  RunManifest manifest;
  std::vector<mcmc::DrawStore> stores;
};
FittedRun read_run(const std::filesystem::path& dir);

void write_summary_csv(const std::filesystem::path& path,
                       const diag::ChainSummary& s);
void write_summary_json(const std::filesystem::path& path,
                        const diag::ChainSummary& s);

// life table CSV: header age,survival or age,hazard
odx::LifeTable load_life_table(const std::filesystem::path& path);

// key=value configuration file; '#' starts a comment
std::map<std::string, std::string> parse_config(
    const std::filesystem::path& path);

std::string hash_text(const std::string& text);

// Versioned chain checkpoint (JSON) for resume.
void save_checkpoint(const std::filesystem::path& path,
                     const mcmc::ChainState& state, std::uint64_t seed);
struct Checkpoint {
  mcmc::ChainState state;
  std::uint64_t seed = 0;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace nathist::io
