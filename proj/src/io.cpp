#include "nathist/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace nathist::io {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // row numbers = index + 2
};

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open file: " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line))
    throw validation_error("empty file: " + path.string());
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    t.rows.push_back(split_csv_line(line));
  }
  return t;
}

int column(const CsvTable& t, const std::string& name,
           const std::filesystem::path& path) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end())
    throw validation_error(path.string() + ": missing column '" + name + "'");
  return static_cast<int>(it - t.header.begin());
}

double parse_double(const std::string& s, const std::filesystem::path& path,
                    std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw validation_error(path.string() + " row " + std::to_string(row) +
                           ": cannot parse number '" + s + "'");
  }
}

}  // namespace

std::vector<IndividualRecord> load_cohort(
    const std::filesystem::path& screens_path,
    const std::filesystem::path& endpoints_path) {
  const CsvTable screens = read_csv(screens_path);
  const CsvTable endpoints = read_csv(endpoints_path);
  const int s_id = column(screens, "id", screens_path);
  const int s_age = column(screens, "age", screens_path);
  const int s_res = column(screens, "result", screens_path);
  const int e_id = column(endpoints, "id", endpoints_path);
  const int e_tpc = column(endpoints, "t_pc", endpoints_path);
  const int e_cens = column(endpoints, "censor_age", endpoints_path);

  struct ScreenRows {
    std::vector<double> ages;
    std::vector<std::uint8_t> results;
    std::set<double> seen;
  };
  std::vector<std::string> order;  // ids in first-appearance order
  std::map<std::string, ScreenRows> by_id;
  for (std::size_t r = 0; r < screens.rows.size(); ++r) {
    const auto& row = screens.rows[r];
    const std::size_t rownum = r + 2;
    if (row.size() != screens.header.size())
      throw validation_error(screens_path.string() + " row " +
                             std::to_string(rownum) + ": wrong field count");
    const std::string& id = row[s_id];
    const double age = parse_double(row[s_age], screens_path, rownum);
    const double res = parse_double(row[s_res], screens_path, rownum);
    if (res != 0.0 && res != 1.0)
      throw validation_error(screens_path.string() + " row " +
                             std::to_string(rownum) +
                             ": result must be 0 or 1");
    auto [it, fresh] = by_id.try_emplace(id);
    if (fresh) order.push_back(id);
    if (!it->second.seen.insert(age).second)
      throw validation_error(screens_path.string() + " row " +
                             std::to_string(rownum) + ": duplicate (id, age) (" +
                             id + ", " + row[s_age] + ")");
    it->second.ages.push_back(age);
    it->second.results.push_back(res == 1.0 ? 1 : 0);
  }

  std::map<std::string, RawEndpoint> ends;
  for (std::size_t r = 0; r < endpoints.rows.size(); ++r) {
    const auto& row = endpoints.rows[r];
    const std::size_t rownum = r + 2;
    if (row.size() != endpoints.header.size())
      throw validation_error(endpoints_path.string() + " row " +
                             std::to_string(rownum) + ": wrong field count");
    RawEndpoint ep;
    ep.t_pc = parse_double(row[e_tpc], endpoints_path, rownum);
    if (!row[e_cens].empty())
      ep.censor_age = parse_double(row[e_cens], endpoints_path, rownum);
    if (!ends.emplace(row[e_id], ep).second)
      throw validation_error(endpoints_path.string() + " row " +
                             std::to_string(rownum) + ": duplicate id '" +
                             row[e_id] + "'");
  }

  std::vector<std::string> problems;
  for (const auto& [id, ep] : ends)
    if (!by_id.count(id)) problems.push_back(id);
  if (!problems.empty()) {
    std::string msg = "individuals with endpoints but no screens (entry age "
                      "undefined):";
    for (const auto& id : problems) msg += " " + id;
    throw validation_error(msg);
  }
  for (const auto& id : order)
    if (!ends.count(id)) problems.push_back(id);
  if (!problems.empty()) {
    std::string msg = "individuals with screens but no endpoint:";
    for (const auto& id : problems) msg += " " + id;
    throw validation_error(msg);
  }

  std::vector<IndividualRecord> records;
  records.reserve(order.size());
  for (const auto& id : order) {
    auto& s = by_id[id];
    records.push_back(
        classify(id, std::move(s.ages), std::move(s.results), ends[id]));
  }
  return records;
}

void write_cohort(const std::filesystem::path& screens,
                  const std::filesystem::path& endpoints,
                  const std::vector<IndividualRecord>& records) {
  std::ofstream s(screens);
  std::ofstream e(endpoints);
  if (!s || !e)
    throw std::runtime_error("cannot open output cohort files");
  s.precision(12);
  e.precision(12);
  s << "id,age,result\n";
  e << "id,t_pc,censor_age\n";
  for (const auto& r : records) {
    for (int j = 0; j < r.n_screens(); ++j)
      s << r.id << ',' << r.screen_ages[j] << ','
        << static_cast<int>(r.screen_results[j]) << '\n';
    e << r.id << ',' << r.t_pc << ',';
    if (r.group != Group::IntervalDetected) e << r.censor_age;
    e << '\n';
  }
}

void write_truth(const std::filesystem::path& path,
                 const std::vector<IndividualRecord>& records,
                 const std::vector<sim::History>& truth) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.precision(12);
  out << "id,tau_hp,indolent,tau_pc\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    out << records[i].id << ',' << truth[i].tau_hp << ','
        << (truth[i].indolent ? 1 : 0) << ',';
    if (std::isfinite(truth[i].tau_pc))
      out << truth[i].tau_pc;
    else
      out << "inf";
    out << '\n';
  }
}

void export_draws(const std::filesystem::path& path,
                  const std::vector<mcmc::DrawStore>& stores) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.precision(17);
  out << "chain,iteration,parameter,value\n";
  for (const auto& st : stores) {
    for (std::size_t k = 0; k < st.size(); ++k) {
      const long iter = st.warmup + static_cast<long>(k + 1) * st.thin;
      out << st.chain_id << ',' << iter << ",lambda_h," << st.lambda_h[k]
          << '\n';
      out << st.chain_id << ',' << iter << ",lambda_prog,"
          << st.lambda_prog[k] << '\n';
      out << st.chain_id << ',' << iter << ",psi," << st.psi[k] << '\n';
      out << st.chain_id << ',' << iter << ",beta," << st.beta[k] << '\n';
    }
  }
}

std::vector<mcmc::DrawStore> import_draws(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const int c_chain = column(t, "chain", path);
  const int c_iter = column(t, "iteration", path);
  const int c_par = column(t, "parameter", path);
  const int c_val = column(t, "value", path);
  std::map<int, mcmc::DrawStore> chains;
  std::map<int, std::set<long>> iters;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const int chain =
        static_cast<int>(parse_double(row[c_chain], path, r + 2));
    const long iter =
        static_cast<long>(parse_double(row[c_iter], path, r + 2));
    const double v = parse_double(row[c_val], path, r + 2);
    auto& st = chains[chain];
    st.chain_id = chain;
    iters[chain].insert(iter);
    const std::string& par = row[c_par];
    if (par == "lambda_h")
      st.lambda_h.push_back(v);
    else if (par == "lambda_prog")
      st.lambda_prog.push_back(v);
    else if (par == "psi")
      st.psi.push_back(v);
    else if (par == "beta")
      st.beta.push_back(v);
    else
      throw validation_error(path.string() + " row " + std::to_string(r + 2) +
                             ": unknown parameter '" + par + "'");
  }
  std::vector<mcmc::DrawStore> out;
  for (auto& [chain, st] : chains) {
    const std::size_t n = st.beta.size();
    if (st.lambda_h.size() != n || st.lambda_prog.size() != n ||
        st.psi.size() != n)
      throw validation_error(path.string() + ": chain " +
                             std::to_string(chain) +
                             " has unbalanced parameter rows");
    out.push_back(std::move(st));
  }
  return out;
}

void export_latents(const std::filesystem::path& path,
                    const std::vector<mcmc::DrawStore>& stores,
                    const std::vector<IndividualRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.precision(12);
  out << "chain,iteration,id,onset_age,indolent\n";
  for (const auto& st : stores) {
    for (std::size_t k = 0; k < st.latent_onset.size(); ++k) {
      const long iter = st.warmup + static_cast<long>(k + 1) * st.thin;
      for (std::size_t i = 0; i < records.size(); ++i) {
        out << st.chain_id << ',' << iter << ',' << records[i].id << ',';
        if (std::isfinite(st.latent_onset[k][i]))
          out << st.latent_onset[k][i];
        else
          out << "inf";
        out << ',' << static_cast<int>(st.latent_indolent[k][i]) << '\n';
      }
    }
  }
}

namespace {

json prior_to_json(const PriorSpec& p) {
  return json{{"t0", p.t0},           {"a_h", p.a_h},
              {"b_h", p.b_h},         {"a_prog", p.a_prog},
              {"b_prog", p.b_prog},   {"a_psi", p.a_psi},
              {"b_psi", p.b_psi},     {"a_beta", p.a_beta},
              {"b_beta", p.b_beta},   {"shape_h", p.shape_h},
              {"shape_prog", p.shape_prog}};
}

PriorSpec prior_from_json(const json& j) {
  PriorSpec p;
  p.t0 = j.at("t0");
  p.a_h = j.at("a_h");
  p.b_h = j.at("b_h");
  p.a_prog = j.at("a_prog");
  p.b_prog = j.at("b_prog");
  p.a_psi = j.at("a_psi");
  p.b_psi = j.at("b_psi");
  p.a_beta = j.at("a_beta");
  p.b_beta = j.at("b_beta");
  p.shape_h = j.at("shape_h");
  p.shape_prog = j.at("shape_prog");
  return p;
}

}  // namespace

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  json j{{"format_version", 1},
         {"seed", m.seed},
         {"chains", m.chains},
         {"iterations", m.iterations},
         {"warmup", m.warmup},
         {"thin", m.thin},
         {"t0", m.t0},
         {"shape_h", m.shape_h},
         {"shape_prog", m.shape_prog},
         {"prior", prior_to_json(m.prior)},
         {"config_text", m.config_text},
         {"config_hash", m.config_hash},
         {"wall_seconds", m.wall_seconds},
         {"accept_h", m.accept_h},
         {"accept_prog", m.accept_prog},
         {"accept_psi", m.accept_psi},
         {"accept_zhp", m.accept_zhp},
         {"eps_h", m.eps_h},
         {"eps_prog", m.eps_prog},
         {"eps_psi", m.eps_psi}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  in >> j;
  RunManifest m;
  m.seed = j.at("seed");
  m.chains = j.at("chains");
  m.iterations = j.at("iterations");
  m.warmup = j.at("warmup");
  m.thin = j.at("thin");
  m.t0 = j.at("t0");
  m.shape_h = j.at("shape_h");
  m.shape_prog = j.at("shape_prog");
  m.prior = prior_from_json(j.at("prior"));
  m.config_text = j.value("config_text", "");
  m.config_hash = j.value("config_hash", "");
  m.wall_seconds = j.value("wall_seconds", 0.0);
  auto vec = [&](const char* k) {
    return j.value(k, std::vector<double>{});
  };
  m.accept_h = vec("accept_h");
  m.accept_prog = vec("accept_prog");
  m.accept_psi = vec("accept_psi");
  m.accept_zhp = vec("accept_zhp");
  m.eps_h = vec("eps_h");
  m.eps_prog = vec("eps_prog");
  m.eps_psi = vec("eps_psi");
  return m;
}

FittedRun read_run(const std::filesystem::path& dir) {
  FittedRun run;
  run.manifest = read_manifest(dir / "manifest.json");
  run.stores = import_draws(dir / "draws.csv");
  for (auto& st : run.stores) {
    st.t0 = run.manifest.t0;
    st.shape_h = run.manifest.shape_h;
    st.shape_prog = run.manifest.shape_prog;
    st.seed = run.manifest.seed;
    st.iterations = run.manifest.iterations;
    st.warmup = run.manifest.warmup;
    st.thin = run.manifest.thin;
  }
  return run;
}

void write_summary_csv(const std::filesystem::path& path,
                       const diag::ChainSummary& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out.precision(10);
  out << "parameter,mean,median,sd,ci_low,ci_high,psrf,ess\n";
  for (const auto& p : s.parameters)
    out << p.name << ',' << p.mean << ',' << p.median << ',' << p.sd << ','
        << p.ci_low << ',' << p.ci_high << ',' << p.psrf << ',' << p.ess
        << '\n';
}

void write_summary_json(const std::filesystem::path& path,
                        const diag::ChainSummary& s) {
  json params = json::array();
  for (const auto& p : s.parameters)
    params.push_back(json{{"parameter", p.name},
                          {"mean", p.mean},
                          {"median", p.median},
                          {"sd", p.sd},
                          {"ci_low", p.ci_low},
                          {"ci_high", p.ci_high},
                          {"psrf", p.psrf},
                          {"ess", p.ess}});
  json j{{"parameters", params},
         {"accept_h", s.accept_h},
         {"accept_prog", s.accept_prog},
         {"accept_psi", s.accept_psi},
         {"accept_zhp", s.accept_zhp}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << '\n';
}

odx::LifeTable load_life_table(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const int c_age = column(t, "age", path);
  int c_val = -1;
  bool is_survival = true;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (t.header[c] == "survival") {
      c_val = static_cast<int>(c);
      is_survival = true;
    } else if (t.header[c] == "hazard") {
      c_val = static_cast<int>(c);
      is_survival = false;
    }
  }
  if (c_val < 0)
    throw validation_error(path.string() +
                           ": need a 'survival' or 'hazard' column");
  std::vector<double> age, val;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    age.push_back(parse_double(t.rows[r][c_age], path, r + 2));
    val.push_back(parse_double(t.rows[r][c_val], path, r + 2));
  }
  return is_survival ? odx::LifeTable::from_survival(std::move(age),
                                                     std::move(val))
                     : odx::LifeTable::from_hazard(std::move(age),
                                                   std::move(val));
}

std::map<std::string, std::string> parse_config(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open config file: " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t rownum = 0;
  while (std::getline(in, line)) {
    ++rownum;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string{};
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw validation_error(path.string() + " line " +
                             std::to_string(rownum) +
                             ": expected key=value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

std::string hash_text(const std::string& text) {
  // FNV-1a 64-bit
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

void save_checkpoint(const std::filesystem::path& path,
                     const mcmc::ChainState& state, std::uint64_t seed) {
  json onset = json::array(), indolent = json::array();
  for (const auto& z : state.latents) {
    onset.push_back(z.has_onset() ? json(z.onset_age) : json());
    indolent.push_back(z.indolent ? 1 : 0);
  }
  json j{{"format_version", 1},
         {"seed", seed},
         {"sweep", state.sweep},
         {"lambda_h", state.params.onset.rate},
         {"shape_h", state.params.onset.shape},
         {"lambda_prog", state.params.progression.rate},
         {"shape_prog", state.params.progression.shape},
         {"psi", state.params.psi},
         {"beta", state.params.beta},
         {"adapt", json{{"h", {{"log_eps", state.adapt_h.log_eps},
                               {"h_sum", state.adapt_h.h_sum}}},
                        {"prog", {{"log_eps", state.adapt_prog.log_eps},
                                  {"h_sum", state.adapt_prog.h_sum}}},
                        {"psi", {{"log_eps", state.adapt_psi.log_eps},
                                 {"h_sum", state.adapt_psi.h_sum}}}}},
         {"onset", onset},
         {"indolent", indolent}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  in >> j;
  if (j.at("format_version") != 1)
    throw std::runtime_error("unsupported checkpoint format version");
  Params p(WeibullRS(j.at("lambda_h"), j.at("shape_h")),
           WeibullRS(j.at("lambda_prog"), j.at("shape_prog")), j.at("psi"),
           j.at("beta"));
  mcmc::ChainState st{p, {}, j.at("sweep"), {}, {}, {}};
  auto adapt = [&](const char* key) {
    const auto& a = j.at("adapt").at(key);
    return mcmc::AdaptState{a.at("log_eps"), a.at("h_sum")};
  };
  st.adapt_h = adapt("h");
  st.adapt_prog = adapt("prog");
  st.adapt_psi = adapt("psi");
  const auto& onset = j.at("onset");
  const auto& indolent = j.at("indolent");
  for (std::size_t i = 0; i < onset.size(); ++i) {
    LatentState z;
    z.onset_age = onset[i].is_null() ? INFINITY : onset[i].get<double>();
    z.indolent = indolent[i].get<int>() != 0;
    st.latents.push_back(z);
  }
  return {std::move(st), j.at("seed")};
}

}  // namespace nathist::io
