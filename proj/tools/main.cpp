#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "nathist/io.hpp"
#include "nathist/stats.hpp"

namespace fs = std::filesystem;
using namespace nathist;

namespace {

struct CommonOpts {
  std::string config_path;
  std::map<std::string, std::string> config;

  // resolved model settings
  PriorSpec prior;

  void load_config() {
    if (!config_path.empty()) config = io::parse_config(config_path);
  }
  double num(const std::string& key, double fallback) const {
    const auto it = config.find(key);
    return it == config.end() ? fallback : std::stod(it->second);
  }
  void resolve_prior() {
    prior.t0 = num("t0", prior.t0);
    prior.a_h = num("a_h", prior.a_h);
    prior.b_h = num("b_h", prior.b_h);
    prior.a_prog = num("a_prog", prior.a_prog);
    prior.b_prog = num("b_prog", prior.b_prog);
    prior.a_psi = num("a_psi", prior.a_psi);
    prior.b_psi = num("b_psi", prior.b_psi);
    prior.a_beta = num("a_beta", prior.a_beta);
    prior.b_beta = num("b_beta", prior.b_beta);
    prior.shape_h = num("alpha_h", prior.shape_h);
    prior.shape_prog = num("alpha_prog", prior.shape_prog);
    prior.validate();
  }
};

std::string describe_options(const std::map<std::string, std::string>& kv) {
  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
  return os.str();
}

std::vector<double> parse_program_ages(const std::string& text) {
  // "50:74:2" (first:last:step) or a comma-separated list
  if (text.find(':') != std::string::npos) {
    double first = 0, last = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream is(text);
    is >> first >> c1 >> last >> c2 >> step;
    if (!is || c1 != ':' || c2 != ':')
      throw validation_error("cannot parse program ages '" + text + "'");
    return odx::ProgramSpec::regular(first, last, step).screen_ages;
  }
  std::vector<double> ages;
  std::istringstream is(text);
  std::string tok;
  while (std::getline(is, tok, ',')) ages.push_back(std::stod(tok));
  return ages;
}

int cmd_simulate(CommonOpts& common, int n, std::uint64_t seed,
                 const std::string& out_dir, double lambda_h,
                 double lambda_prog, double psi, double beta) {
  common.resolve_prior();
  sim::SimConfig cfg;
  cfg.t0 = common.prior.t0;
  cfg.n = n;
  cfg.seed = seed;
  const Params truth(WeibullRS(lambda_h, common.prior.shape_h),
                     WeibullRS(lambda_prog, common.prior.shape_prog), psi,
                     beta);
  const auto simulated = sim::simulate_cohort(truth, cfg);
  fs::create_directories(out_dir);
  io::write_cohort(fs::path(out_dir) / "screens.csv",
                   fs::path(out_dir) / "endpoints.csv",
                   simulated.cohort.records);
  io::write_truth(fs::path(out_dir) / "truth.csv", simulated.cohort.records,
                  simulated.truth);
  long censored = 0, screen = 0, interval = 0;
  for (const auto& r : simulated.cohort.records) {
    censored += r.group == Group::Censored;
    screen += r.group == Group::ScreenDetected;
    interval += r.group == Group::IntervalDetected;
  }
  std::cout << "simulated " << n << " records (censored " << censored
            << ", screen-detected " << screen << ", interval-detected "
            << interval << "), excluded " << simulated.excluded
            << " left-truncated attempts\n";
  return 0;
}

int cmd_fit(CommonOpts& common, const std::string& screens,
            const std::string& endpoints, const std::string& out_dir,
            int chains, int iters, int warmup, int thin, std::uint64_t seed,
            bool export_latents, double init_lh, double init_lp,
            double init_psi, double init_beta, bool save_checkpoints,
            const std::string& resume_dir) {
  common.resolve_prior();
  const auto t_start = std::chrono::steady_clock::now();
  auto records = io::load_cohort(screens, endpoints);
  const Cohort cohort = Cohort::build(common.prior.t0, std::move(records));

  mcmc::ChainConfig ccfg;
  ccfg.iterations = iters;
  ccfg.warmup = warmup;
  ccfg.thin = thin;
  ccfg.store_latents = export_latents;

  std::vector<mcmc::DrawStore> stores(chains);
  std::vector<mcmc::ChainState> final_states;
  final_states.reserve(chains);
  std::vector<std::unique_ptr<mcmc::Sampler>> samplers(chains);

  auto run_one = [&](int c) {
    const std::uint64_t chain_seed = derive_seed(seed, c);
    samplers[c] = std::make_unique<mcmc::Sampler>(cohort, common.prior,
                                                  chain_seed);
    if (!resume_dir.empty()) {
      const auto cp = io::load_checkpoint(
          fs::path(resume_dir) / ("checkpoint_" + std::to_string(c) + ".json"));
      samplers[c]->set_state(cp.state);
    } else {
      // over-dispersed defaults unless explicit initials were given
      Rng init_rng(chain_seed, Stream::Init, 0xFFFFFFFFu);
      const double lh =
          init_lh > 0 ? init_lh : init_rng.uniform(2e-5, 2e-4);
      const double lp =
          init_lp > 0 ? init_lp : init_rng.uniform(1e-2, 1e-1);
      const double ps = init_psi >= 0 ? init_psi : init_rng.uniform(0.0, 1.0);
      const double be =
          init_beta >= 0 ? init_beta : init_rng.uniform(0.7, 0.95);
      samplers[c]->init_latents(
          Params(WeibullRS(lh, common.prior.shape_h),
                 WeibullRS(lp, common.prior.shape_prog), ps, be));
    }
    stores[c] = samplers[c]->run(ccfg);
    stores[c].chain_id = c;
  };

  {
    std::vector<std::thread> pool;
    const unsigned workers =
        std::min<unsigned>(chains, std::thread::hardware_concurrency());
    std::atomic<int> next{0};
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int c; (c = next.fetch_add(1)) < chains;) run_one(c);
      });
    for (auto& t : pool) t.join();
  }

  fs::create_directories(out_dir);
  io::export_draws(fs::path(out_dir) / "draws.csv", stores);
  if (export_latents)
    io::export_latents(fs::path(out_dir) / "latents.csv", stores,
                       cohort.records);
  for (int c = 0; c < chains; ++c) {
    if (save_checkpoints)
      io::save_checkpoint(
          fs::path(out_dir) / ("checkpoint_" + std::to_string(c) + ".json"),
          samplers[c]->state(), derive_seed(seed, c));
  }

  io::RunManifest m;
  m.seed = seed;
  m.chains = chains;
  m.iterations = iters;
  m.warmup = warmup;
  m.thin = thin;
  m.t0 = common.prior.t0;
  m.shape_h = common.prior.shape_h;
  m.shape_prog = common.prior.shape_prog;
  m.prior = common.prior;
  m.config_text = describe_options(common.config);
  m.config_hash = io::hash_text(m.config_text);
  for (const auto& st : stores) {
    m.accept_h.push_back(st.accept_h);
    m.accept_prog.push_back(st.accept_prog);
    m.accept_psi.push_back(st.accept_psi);
    m.accept_zhp.push_back(st.accept_zhp);
    m.eps_h.push_back(st.eps_h);
    m.eps_prog.push_back(st.eps_prog);
    m.eps_psi.push_back(st.eps_psi);
  }
  m.wall_seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t_start)
                       .count();
  io::write_manifest(fs::path(out_dir) / "manifest.json", m);

  const auto summary = diag::summarize(
      stores, {diag::functional_mean_sojourn(common.prior.shape_prog)});
  io::write_summary_csv(fs::path(out_dir) / "summary.csv", summary);
  io::write_summary_json(fs::path(out_dir) / "summary.json", summary);
  std::cout << "fit complete: " << chains << " chains x " << stores[0].size()
            << " kept draws -> " << out_dir << " (" << m.wall_seconds
            << " s)\n";
  return 0;
}

int cmd_diagnose(const std::string& run_dir, const std::string& out_dir) {
  const auto run = io::read_run(run_dir);
  std::vector<diag::Functional> fns{
      diag::functional_mean_sojourn(run.manifest.shape_prog),
      diag::functional_onset_risk_by(80.0, run.manifest.t0,
                                     run.manifest.shape_h)};
  auto summary = diag::summarize(run.stores, fns);
  summary.accept_h = run.manifest.accept_h;
  summary.accept_prog = run.manifest.accept_prog;
  summary.accept_psi = run.manifest.accept_psi;
  summary.accept_zhp = run.manifest.accept_zhp;
  fs::create_directories(out_dir);
  io::write_summary_csv(fs::path(out_dir) / "summary.csv", summary);
  io::write_summary_json(fs::path(out_dir) / "summary.json", summary);
  io::export_draws(fs::path(out_dir) / "trace.csv", run.stores);
  std::cout << "diagnostics written to " << out_dir << "\n";
  for (const auto& p : summary.parameters)
    std::cout << "  " << p.name << ": mean " << p.mean << "  95% CI ["
              << p.ci_low << ", " << p.ci_high << "]  PSRF " << p.psrf
              << "  ESS " << p.ess << "\n";
  return 0;
}

int cmd_compare(CommonOpts& common, const std::string& screens,
                const std::string& endpoints,
                const std::vector<std::string>& model_dirs, int j_inner,
                std::uint64_t seed, bool smooth, const std::string& out_dir) {
  common.resolve_prior();
  auto records = io::load_cohort(screens, endpoints);

  struct ModelFit {
    std::string dir;
    double shape_h, shape_prog;
    loo::PredictiveFit fit;
  };
  std::vector<ModelFit> fits;
  for (const auto& dir : model_dirs) {
    const auto run = io::read_run(dir);
    const Cohort cohort = Cohort::build(run.manifest.t0, records);
    loo::LooConfig cfg;
    cfg.j_inner = j_inner;
    cfg.seed = seed;
    cfg.pareto_smooth = smooth;
    fits.push_back({dir, run.manifest.shape_h, run.manifest.shape_prog,
                    loo::aloocv(run.stores, cohort, cfg)});
  }

  std::size_t best = 0;
  for (std::size_t k = 1; k < fits.size(); ++k)
    if (fits[k].fit.pf_hat > fits[best].fit.pf_hat) best = k;

  fs::create_directories(out_dir);
  std::ofstream grid(fs::path(out_dir) / "model_grid.csv");
  grid.precision(10);
  grid << "model,alpha_h,alpha_prog,pf_hat,t_vs_best,p_vs_best,best\n";
  for (std::size_t k = 0; k < fits.size(); ++k) {
    double t = 0.0, p = 1.0;
    if (k != best) {
      const auto tt = loo::paired_t_test(fits[k].fit, fits[best].fit);
      t = tt.t;
      p = tt.p_value;
    }
    grid << fits[k].dir << ',' << fits[k].shape_h << ',' << fits[k].shape_prog
         << ',' << fits[k].fit.pf_hat << ',' << t << ',' << p << ','
         << (k == best ? 1 : 0) << '\n';
    std::ofstream contrib(fs::path(out_dir) /
                          ("contributions_" + std::to_string(k) + ".csv"));
    contrib.precision(10);
    contrib << "id,contribution,max_weight\n";
    for (std::size_t i = 0; i < records.size(); ++i)
      contrib << records[i].id << ',' << fits[k].fit.contributions[i] << ','
              << fits[k].fit.max_weight[i] << '\n';
  }
  std::cout << "model comparison written to " << out_dir << " (best: "
            << fits[best].dir << ", pf_hat " << fits[best].fit.pf_hat
            << ")\n";
  return 0;
}

int cmd_overdx(const std::string& run_dir, const std::string& life_table,
               const std::string& program_ages, int sims_per_draw,
               std::uint64_t seed, const std::string& out_dir) {
  const auto run = io::read_run(run_dir);
  const auto life = io::load_life_table(life_table);
  odx::ProgramSpec program;
  program.screen_ages = parse_program_ages(program_ages);
  const auto result = odx::overdiagnosis_rate(
      run.stores, program, life, sims_per_draw, seed, run.manifest.t0);

  fs::create_directories(out_dir);
  std::ofstream draws(fs::path(out_dir) / "overdx_draws.csv");
  draws.precision(10);
  draws << "draw,total,indolent,mortality,detected\n";
  std::vector<double> total, ind, mort;
  for (std::size_t k = 0; k < result.draws.size(); ++k) {
    const auto& d = result.draws[k];
    draws << k << ',' << d.total << ',' << d.indolent << ',' << d.mortality
          << ',' << d.detected << '\n';
    total.push_back(d.total);
    ind.push_back(d.indolent);
    mort.push_back(d.mortality);
  }
  auto summ = [](std::vector<double> v) {
    nlohmann::json j{{"mean", nathist::stats::mean(v)},
                     {"ci_low", nathist::stats::quantile(v, 0.025)},
                     {"ci_high", nathist::stats::quantile(v, 0.975)}};
    return j;
  };
  nlohmann::json j{{"total", summ(total)},
                   {"indolence", summ(ind)},
                   {"other_cause_mortality", summ(mort)},
                   {"sims_per_draw", sims_per_draw}};
  std::ofstream out(fs::path(out_dir) / "overdx_summary.json");
  out << j.dump(2) << '\n';
  std::cout << "overdiagnosis rate: mean " << nathist::stats::mean(total) << " (95% CI "
            << nathist::stats::quantile(total, 0.025) << " - "
            << nathist::stats::quantile(total, 0.975) << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Bayesian fitting of a semi-Markov mixture model of cancer natural "
      "history to individual-level screening data"};
  app.require_subcommand(1);

  CommonOpts common;

  try {
    // simulate
    auto* s_sim = app.add_subcommand("simulate", "generate a synthetic cohort");
    int sim_n = 5000;
    std::uint64_t sim_seed = 1;
    std::string sim_out = "cohort";
    double lambda_h = 6.5e-5, lambda_prog = 3.14e-2, psi = 0.1, beta = 0.85;
    s_sim->add_option("--n", sim_n, "cohort size");
    s_sim->add_option("--seed", sim_seed, "RNG seed");
    s_sim->add_option("--out", sim_out, "output directory");
    s_sim->add_option("--config", common.config_path, "config file");
    s_sim->add_option("--lambda-h", lambda_h, "true onset rate");
    s_sim->add_option("--lambda-prog", lambda_prog, "true progression rate");
    s_sim->add_option("--psi", psi, "true indolent fraction");
    s_sim->add_option("--beta", beta, "true screen sensitivity");
    s_sim->add_option("--alpha-h", common.prior.shape_h, "onset shape");
    s_sim->add_option("--alpha-prog", common.prior.shape_prog,
                      "progression shape");
    s_sim->add_option("--t0", common.prior.t0, "onset start age");

    // fit
    auto* s_fit = app.add_subcommand("fit", "run the MCMC sampler");
    std::string screens, endpoints, fit_out = "fit", resume_dir;
    int chains = 4, iters = 15000, warmup = 5000, thin = 10;
    std::uint64_t fit_seed = 1;
    bool export_latents = false, save_checkpoints = false;
    double init_lh = 0, init_lp = 0, init_psi = -1, init_beta = -1;
    s_fit->add_option("--screens", screens, "screens CSV")->required();
    s_fit->add_option("--endpoints", endpoints, "endpoints CSV")->required();
    s_fit->add_option("--out", fit_out, "output directory");
    s_fit->add_option("--config", common.config_path, "config file");
    s_fit->add_option("--chains", chains, "number of chains");
    s_fit->add_option("--iters", iters, "total sweeps per chain");
    s_fit->add_option("--warmup", warmup, "warmup sweeps");
    s_fit->add_option("--thin", thin, "post-warmup thinning");
    s_fit->add_option("--seed", fit_seed, "RNG seed");
    s_fit->add_option("--alpha-h", common.prior.shape_h, "onset shape");
    s_fit->add_option("--alpha-prog", common.prior.shape_prog,
                      "progression shape");
    s_fit->add_option("--t0", common.prior.t0, "onset start age");
    s_fit->add_flag("--export-latents", export_latents,
                    "also export per-individual latent draws");
    s_fit->add_flag("--save-checkpoints", save_checkpoints,
                    "write per-chain resume checkpoints");
    s_fit->add_option("--resume-from", resume_dir,
                      "directory with checkpoint_<k>.json files");
    s_fit->add_option("--init-lambda-h", init_lh, "explicit initial");
    s_fit->add_option("--init-lambda-prog", init_lp, "explicit initial");
    s_fit->add_option("--init-psi", init_psi, "explicit initial");
    s_fit->add_option("--init-beta", init_beta, "explicit initial");

    // diagnose
    auto* s_diag = app.add_subcommand("diagnose", "convergence diagnostics");
    std::string diag_run = "fit", diag_out = "diagnostics";
    s_diag->add_option("--run", diag_run, "fitted run directory")->required();
    s_diag->add_option("--out", diag_out, "output directory");

    // compare
    auto* s_cmp = app.add_subcommand("compare",
                                     "approximate leave-one-out comparison");
    std::vector<std::string> model_dirs;
    std::string cmp_screens, cmp_endpoints, cmp_out = "comparison";
    int j_inner = 256;
    std::uint64_t cmp_seed = 1;
    bool smooth = false;
    s_cmp->add_option("--screens", cmp_screens, "screens CSV")->required();
    s_cmp->add_option("--endpoints", cmp_endpoints, "endpoints CSV")
        ->required();
    s_cmp->add_option("--model", model_dirs, "fitted run directory (repeat)")
        ->required();
    s_cmp->add_option("--j-inner", j_inner, "inner importance samples");
    s_cmp->add_option("--seed", cmp_seed, "RNG seed");
    s_cmp->add_flag("--smooth", smooth, "Pareto-smooth the outer weights");
    s_cmp->add_option("--out", cmp_out, "output directory");

    // overdx
    auto* s_odx = app.add_subcommand("overdx", "overdiagnosis decomposition");
    std::string odx_run = "fit", life_table, program_ages = "50:74:2",
                odx_out = "overdiagnosis";
    int sims_per_draw = 10000;
    std::uint64_t odx_seed = 1;
    s_odx->add_option("--run", odx_run, "fitted run directory")->required();
    s_odx->add_option("--life-table", life_table,
                      "other-cause life table CSV")->required();
    s_odx->add_option("--program-ages", program_ages,
                      "first:last:step or comma list");
    s_odx->add_option("--sims-per-draw", sims_per_draw,
                      "microsimulated women per posterior draw");
    s_odx->add_option("--seed", odx_seed, "RNG seed");
    s_odx->add_option("--out", odx_out, "output directory");

    CLI11_PARSE(app, argc, argv);
    common.load_config();

    if (s_sim->parsed())
      return cmd_simulate(common, sim_n, sim_seed, sim_out, lambda_h,
                          lambda_prog, psi, beta);
    if (s_fit->parsed())
      return cmd_fit(common, screens, endpoints, fit_out, chains, iters,
                     warmup, thin, fit_seed, export_latents, init_lh, init_lp,
                     init_psi, init_beta, save_checkpoints, resume_dir);
    if (s_diag->parsed()) return cmd_diagnose(diag_run, diag_out);
    if (s_cmp->parsed())
      return cmd_compare(common, cmp_screens, cmp_endpoints, model_dirs,
                         j_inner, cmp_seed, smooth, cmp_out);
    if (s_odx->parsed())
      return cmd_overdx(odx_run, life_table, program_ages, sims_per_draw,
                        odx_seed, odx_out);
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", e.what()}};
    std::cerr << err.dump() << std::endl;
    return 1;
  }
  return 0;
}
