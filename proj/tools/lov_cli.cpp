// Command-line front end: simulate / price / localvol / calibrate / report.
// Every run writes a manifest (resolved config, seed, input digests, timing)
// next to its outputs; --manifest re-executes a previous run bitwise.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lov/calibrate.hpp"
#include "lov/lov_model.hpp"
#include "lov/lsmc.hpp"
#include "lov/market.hpp"
#include "lov/sensitivity.hpp"
#include "lov/simulate.hpp"
#include "lov/surface.hpp"

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fnv1a_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return json::parse(in);
}

// Manifest written before exit on success and failure alike.
struct Manifest {
  json doc;
  std::string path;

  Manifest(const std::string& command, const std::string& out_path) : path(out_path) {
    doc["command"] = command;
    doc["version"] = kVersion;
    doc["status"] = "running";
  }
  void input(const std::string& key, const std::string& file) {
    doc["inputs"][key] = {{"path", file}, {"digest", fnv1a_digest(file)}};
  }
  void finish(bool ok, double seconds) {
    doc["status"] = ok ? "ok" : "error";
    doc["elapsed_seconds"] = seconds;
    fs::create_directories(fs::path(path).parent_path().empty()
                               ? fs::path(".")
                               : fs::path(path).parent_path());
    std::ofstream out(path);
    out << doc.dump(2) << "\n";
  }
};

lov::MarketEnvironment env_from_json(const json& j) {
  lov::MarketEnvironment env;
  env.spot = j.at("spot").get<double>();
  env.rate = j.value("rate", 0.0);
  env.dividend_yield = j.value("dividend_yield", 0.0);
  env.valuation_date = j.value("valuation_date", "");
  return env;
}

lov::SimConfig sim_from_json(const json& j) {
  lov::SimConfig c;
  c.T = j.value("T", 1.0);
  c.N = j.value("steps", 252);
  c.J = j.value("paths", 1 << 12);
  c.kappa = j.value("kappa", 0.0);
  c.M = j.value("corridors", 63);
  c.seed = j.value("seed", std::uint64_t{0});
  c.sigma_ref = j.value("sigma_ref", 0.2);
  c.bandwidth_mult = j.value("bandwidth_mult", 1.5);
  c.var_floor = j.value("var_floor", 1e-4);
  c.var_cap = j.value("var_cap", 4.0);
  if (c.J < 2 || c.J % 2 != 0) throw std::runtime_error("config: paths must be even");
  if (c.N < 1 || c.M < 1 || !(c.T > 0.0)) throw std::runtime_error("config: bad grid");
  return c;
}

lov::SensitivitySpec spec_from_json(const json& j) {
  const std::string type = j.value("type", "zero");
  if (type == "zero") return lov::ZeroSensitivity{};
  if (type == "tanh") {
    return lov::TanhSensitivity{j.at("scale").get<double>(), j.value("alpha", 1.0)};
  }
  if (type == "emalog") return lov::EmaLogSensitivity{j.at("beta").get<double>()};
  if (type == "onefactor") {
    lov::OneFactorCorridor o;
    o.beta = j.at("beta").get<double>();
    o.corridors = j.at("corridors").get<std::vector<int>>();
    o.multiplicative = j.value("multiplicative", false);
    return o;
  }
  if (type == "neural") {
    if (j.contains("checkpoint")) {
      return lov::NeuralSensitivity{
          std::make_shared<lov::Mlp>(lov::load_checkpoint(j.at("checkpoint").get<std::string>()))};
    }
    lov::Mlp::Config cfg;
    cfg.t_ref = j.value("t_ref", 1.0);
    cfg.x0_ref = j.value("x0_ref", 1.0);
    cfg.affine_shift = j.value("affine_shift", false);
    cfg.seed = j.value("seed", std::uint64_t{0});
    return lov::NeuralSensitivity{std::make_shared<lov::Mlp>(cfg)};
  }
  throw std::runtime_error("config: unknown sensitivity type '" + type + "'");
}

lov::CorrectionMode mode_from_json(const json& j) {
  const std::string m = j.value("mode", "additive");
  if (m == "additive") return lov::CorrectionMode::Additive;
  if (m == "multiplicative") return lov::CorrectionMode::Multiplicative;
  throw std::runtime_error("config: mode must be additive or multiplicative");
}

void write_prices_csv(const std::string& path, const std::vector<lov::OptionQuote>& quotes,
                      const std::vector<double>& prices, const std::vector<double>& errors) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  out << "strike,expiry,flag,exercise,price,std_error\n";
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    out << quotes[i].strike << "," << quotes[i].expiry << "," << quotes[i].payoff_flag << ","
        << (quotes[i].exercise == lov::Exercise::American ? "A" : "E") << "," << prices[i]
        << "," << errors[i] << "\n";
  }
}

// --- subcommand bodies ------------------------------------------------------

int run_simulate(const json& cfg, const std::string& surface_path,
                 const std::string& out_dir, bool dump_paths, Manifest& manifest) {
  const auto env = env_from_json(cfg.at("env"));
  const auto sim = sim_from_json(cfg);
  const auto spec = spec_from_json(cfg.value("spec", json{{"type", "zero"}}));
  lov::LocalVolSurface surface{lov::read_surface_csv(surface_path)};
  lov::validate_spec(spec, &surface, sim.T);

  lov::LovModel model{&surface,
                      lov::CorridorPartition::build(env.spot, sim.sigma_ref, sim.T, sim.M),
                      spec, mode_from_json(cfg), sim.kappa, sim.var_floor, sim.var_cap, false};
  const auto t0 = std::chrono::steady_clock::now();
  lov::PathEnsemble ens = lov::simulate_lov(sim, env, model);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir + "/terminal.csv");
    out.precision(17);
    out << "path_id,X_T\n";
    for (int j = 0; j < ens.J; ++j) out << j << "," << ens.X(j, ens.N) << "\n";
  }
  if (dump_paths) {
    std::ofstream out(out_dir + "/paths.csv");
    out.precision(17);
    out << "path_id,step,t,X,sigma\n";
    for (int j = 0; j < ens.J; ++j) {
      for (int n = 0; n <= ens.N; ++n) {
        out << j << "," << n << "," << n * ens.dt << "," << ens.X(j, n) << ","
            << (n < ens.N ? ens.sigma(j, n) : ens.sigma(j, ens.N - 1)) << "\n";
      }
    }
  }
  json summary{{"paths", ens.J},
               {"steps", ens.N},
               {"clamp_events", ens.clamp_events},
               {"mass_residual", ens.mass_residual},
               {"total_mass", ens.total_mass},
               {"runtime_seconds", secs}};
  std::ofstream(out_dir + "/summary.json") << summary.dump(2) << "\n";
  manifest.doc["summary"] = summary;
  std::cout << "simulated " << ens.J << " paths x " << ens.N << " steps in " << secs
            << " s, clamp events " << ens.clamp_events << "\n";
  return 0;
}

int run_price(const json& cfg, const std::string& surface_path,
              const std::string& chain_path, const std::string& out_path) {
  const auto env = env_from_json(cfg.at("env"));
  auto sim = sim_from_json(cfg);
  const auto spec = spec_from_json(cfg.value("spec", json{{"type", "zero"}}));
  lov::LocalVolSurface surface{lov::read_surface_csv(surface_path)};
  auto quotes = lov::load_chain(chain_path, env, cfg.value("max_rel_spread", 1.0));
  if (quotes.empty()) throw std::runtime_error("no instruments after spread filter");

  double t_max = 0.0;
  for (const auto& q : quotes) t_max = std::max(t_max, q.expiry);
  if (sim.T + 1e-12 < t_max) throw std::runtime_error("config: T below the longest expiry");
  sim.record_bands = true;

  lov::LovModel model{&surface,
                      lov::CorridorPartition::build(env.spot, sim.sigma_ref, sim.T, sim.M),
                      spec, mode_from_json(cfg), sim.kappa, sim.var_floor, sim.var_cap, false};
  lov::PathEnsemble ens = lov::simulate_lov(sim, env, model);

  std::vector<double> prices, errors;
  for (const auto& q : quotes) {
    if (q.exercise == lov::Exercise::American) {
      auto r = lov::price_american_put(ens, q.strike, q.expiry, env.rate,
                                       lov::all_steps_to(ens, q.expiry));
      prices.push_back(r.price);
      errors.push_back(r.std_error);
    } else {
      auto r = lov::price_european(ens, q.strike, q.expiry, env.rate, q.payoff_flag);
      prices.push_back(r.price);
      errors.push_back(r.std_error);
    }
  }
  write_prices_csv(out_path, quotes, prices, errors);
  std::cout << "priced " << quotes.size() << " instruments -> " << out_path << "\n";
  return 0;
}

int run_localvol(const std::string& implied_path, const std::string& env_path,
                 const std::string& out_path) {
  lov::ImpliedVolSurface iv{lov::read_surface_csv(implied_path)};
  const auto env = lov::load_environment(env_path);
  std::vector<lov::DupireWarning> warnings;
  lov::LocalVolSurface local = lov::dupire_from_implied(iv, env, &warnings);
  lov::write_surface_csv(out_path, local.grid);
  for (const auto& w : warnings) {
    std::cerr << "warning: local variance clamped at node (t=" << w.time_index
              << ", k=" << w.strike_index << "), raw " << w.raw_variance << "\n";
  }
  std::cout << "local vol surface -> " << out_path << " (" << warnings.size()
            << " clamped nodes)\n";
  return 0;
}

lov::CalibConfig calib_from_json(const json& cfg) {
  lov::CalibConfig cc;
  cc.sim = sim_from_json(cfg.at("sim"));
  if (cfg.contains("schedule")) {
    cc.schedule.clear();
    for (const auto& s : cfg.at("schedule")) {
      cc.schedule.push_back({s.value("start_epoch", 0), s.at("pairs").get<int>()});
    }
  }
  cc.epoch_limit = cfg.value("epoch_limit", 1000);
  cc.window = cfg.value("window", 50);
  cc.window_range_frac = cfg.value("window_range_frac", 0.05);
  cc.learning_rate = cfg.value("learning_rate", 1e-3);
  const std::string g = cfg.value("gradient", "pathwise");
  if (g == "pathwise") {
    cc.method = lov::GradientMethod::PathwiseFrozen;
  } else if (g == "fd") {
    cc.method = lov::GradientMethod::FiniteDifference;
  } else {
    throw std::runtime_error("config: gradient must be pathwise or fd");
  }
  cc.seed = cfg.value("seed", std::uint64_t{0});
  cc.holdout_seed = cfg.value("holdout_seed", std::uint64_t{900001});
  cc.final_pairs = cfg.value("final_pairs", 1 << 12);
  cc.checkpoint_every = cfg.value("checkpoint_every", 0);
  cc.fd_step = cfg.value("fd_step", 1e-4);
  return cc;
}

int run_calibrate(const json& cfg, const std::string& chain_path,
                  const std::string& env_path, const std::string& surface_path,
                  const std::string& out_dir, Manifest& manifest) {
  const auto env = lov::load_environment(env_path);
  lov::LocalVolSurface surface{lov::read_surface_csv(surface_path)};
  auto quotes = lov::load_chain(chain_path, env, cfg.value("max_rel_spread", 1.0));
  // training set: American puts only; European calls are matched through the
  // local-vol layer by construction and kept for reporting
  std::erase_if(quotes, [](const lov::OptionQuote& q) {
    return q.exercise != lov::Exercise::American || q.payoff_flag != -1;
  });
  if (quotes.empty()) throw std::runtime_error("no American puts to calibrate to");
  lov::calibration_weights(quotes, env, cfg.value("vega_floor", 1e-2));

  lov::CalibConfig cc = calib_from_json(cfg);
  cc.out_dir = out_dir;
  auto spec = spec_from_json(cfg.at("spec"));
  lov::LovModel model{
      &surface,
      lov::CorridorPartition::build(env.spot, cc.sim.sigma_ref, cc.sim.T, cc.sim.M),
      spec, mode_from_json(cfg), cc.sim.kappa, cc.sim.var_floor, cc.sim.var_cap, false};

  const auto t0 = std::chrono::steady_clock::now();
  lov::CalibrationResult res = lov::calibrate(model, cc, env, quotes);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  int in_band = 0;
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    if (res.final_prices[i] >= quotes[i].bid && res.final_prices[i] <= quotes[i].ask) ++in_band;
  }
  json report{{"converged", res.converged},
              {"epochs", res.history.size()},
              {"alpha", res.alpha},
              {"final_loss", res.final_loss},
              {"instruments", quotes.size()},
              {"in_band", in_band},
              {"runtime_seconds", secs}};
  std::ofstream(out_dir + "/report.json") << report.dump(2) << "\n";
  manifest.doc["report"] = report;
  std::cout << "calibration " << (res.converged ? "converged" : "hit the epoch limit")
            << " after " << res.history.size() << " epochs; held-out loss " << res.final_loss
            << " vs alpha " << res.alpha << " (" << in_band << "/" << quotes.size()
            << " in band), " << secs << " s\n";
  return 0;
}

int run_report(const json& cfg, const std::string& chain_path, const std::string& env_path,
               const std::string& surface_path, const std::string& out_dir) {
  const auto env = lov::load_environment(env_path);
  lov::LocalVolSurface surface{lov::read_surface_csv(surface_path)};
  auto quotes = lov::load_chain(chain_path, env, cfg.value("max_rel_spread", 1.0));
  if (quotes.empty()) throw std::runtime_error("no instruments to report on");
  const auto spec = spec_from_json(cfg.at("spec"));

  auto sim = sim_from_json(cfg.at("sim"));
  double t_max = 0.0;
  for (const auto& q : quotes) t_max = std::max(t_max, q.expiry);
  if (sim.T + 1e-12 < t_max) throw std::runtime_error("config: T below the longest expiry");
  sim.record_bands = true;

  lov::CorridorPartition partition =
      lov::CorridorPartition::build(env.spot, sim.sigma_ref, sim.T, sim.M);
  lov::LovModel model{&surface, partition, spec, mode_from_json(cfg),
                      sim.kappa, sim.var_floor, sim.var_cap, false};
  lov::PathEnsemble ens = lov::simulate_lov(sim, env, model);

  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir + "/instrument_fit.csv");
    out.precision(17);
    out << "strike,expiry,flag,model_price,bid,ask,in_band\n";
    for (const auto& q : quotes) {
      double price;
      if (q.exercise == lov::Exercise::American && q.payoff_flag == -1) {
        price = lov::price_american_put(ens, q.strike, q.expiry, env.rate,
                                        lov::all_steps_to(ens, q.expiry))
                    .price;
      } else {
        price = lov::price_european(ens, q.strike, q.expiry, env.rate, q.payoff_flag).price;
      }
      out << q.strike << "," << q.expiry << "," << q.payoff_flag << "," << price << ","
          << q.bid << "," << q.ask << "," << (price >= q.bid && price <= q.ask ? 1 : 0)
          << "\n";
    }
  }
  // plot data: sensitivity slices x -> ell(t, X, x) on the corridor nodes
  if (cfg.contains("slices")) {
    int idx = 0;
    for (const auto& s : cfg.at("slices")) {
      const double t = s.at("t").get<double>();
      const double X = s.at("X").get<double>();
      std::ofstream out(out_dir + "/sensitivity_slice_" + std::to_string(idx++) + ".csv");
      out.precision(17);
      out << "x,ell\n";
      for (double x : partition.nodes()) {
        out << x << "," << lov::eval(spec, t, X, x, partition) << "\n";
      }
    }
  }
  // plot data: one path's realized vs projected terminal occupation
  {
    const int j = cfg.value("snapshot_path", 0);
    const double h = lov::bandwidth(ens.X.col(ens.N), sim.bandwidth_mult);
    auto proj = lov::project_occupation(ens.occupation, ens.J, ens.M, ens.X.col(ens.N), h);
    std::ofstream out(out_dir + "/occupation_snapshot.csv");
    out.precision(17);
    out << "node,realized,projected\n";
    for (int m = 0; m < ens.M; ++m) {
      out << partition.nodes()[static_cast<std::size_t>(m)] << ","
          << ens.occupation[static_cast<std::size_t>(j) * ens.M + m] << ","
          << proj.projected[static_cast<std::size_t>(j) * ens.M + m] << "\n";
    }
  }
  // plot data: model vs surface implied smile on the quote strikes
  {
    std::ofstream out(out_dir + "/smile.csv");
    out.precision(17);
    out << "expiry,strike,model_call,surface_vol\n";
    for (const auto& q : quotes) {
      if (q.payoff_flag != 1) continue;
      const double call = lov::price_european(ens, q.strike, q.expiry, env.rate, 1).price;
      out << q.expiry << "," << q.strike << "," << call << ","
          << surface.at(q.expiry, q.strike) << "\n";
    }
  }
  if (cfg.contains("loss_history")) {
    fs::copy_file(cfg.at("loss_history").get<std::string>(), out_dir + "/loss_curve.csv",
                  fs::copy_options::overwrite_existing);
  }
  std::cout << "report -> " << out_dir << "\n";
  return 0;
}

struct Args {
  std::string command, config, surface, chain, env, out, out_dir, implied, manifest_in;
  bool dump_paths = false;
};

int dispatch(const Args& a);

int rerun_manifest(const std::string& path) {
  json m = load_json(path);
  Args a;
  a.command = m.at("command").get<std::string>();
  const json& args = m.at("args");
  a.config = args.value("config", "");
  a.surface = args.value("surface", "");
  a.chain = args.value("chain", "");
  a.env = args.value("env", "");
  a.out = args.value("out", "");
  a.out_dir = args.value("out_dir", "");
  a.implied = args.value("implied", "");
  a.dump_paths = args.value("dump_paths", false);
  return dispatch(a);
}

int dispatch(const Args& a) {
  std::string manifest_path;
  if (!a.out_dir.empty()) {
    manifest_path = a.out_dir + "/manifest.json";
  } else if (!a.out.empty()) {
    manifest_path = (fs::is_directory(a.out) ? a.out + "/manifest.json"
                                             : a.out + ".manifest.json");
  } else {
    manifest_path = a.command + ".manifest.json";
  }
  Manifest manifest(a.command, manifest_path);
  manifest.doc["args"] = {{"config", a.config},   {"surface", a.surface},
                          {"chain", a.chain},     {"env", a.env},
                          {"out", a.out},         {"out_dir", a.out_dir},
                          {"implied", a.implied}, {"dump_paths", a.dump_paths}};
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  try {
    json cfg;
    if (!a.config.empty()) {
      cfg = load_json(a.config);
      manifest.input("config", a.config);
      manifest.doc["resolved_config"] = cfg;
      manifest.doc["seed"] = cfg.value("seed", cfg.contains("sim")
                                                   ? cfg["sim"].value("seed", std::uint64_t{0})
                                                   : std::uint64_t{0});
    }
    if (!a.surface.empty()) manifest.input("surface", a.surface);
    if (!a.chain.empty()) manifest.input("chain", a.chain);
    if (!a.env.empty()) manifest.input("env", a.env);
    if (!a.implied.empty()) manifest.input("implied", a.implied);

    int rc = 2;
    if (a.command == "simulate") {
      rc = run_simulate(cfg, a.surface, a.out_dir, a.dump_paths, manifest);
    } else if (a.command == "price") {
      rc = run_price(cfg, a.surface, a.chain, a.out);
    } else if (a.command == "localvol") {
      rc = run_localvol(a.implied, a.env, a.out);
    } else if (a.command == "calibrate") {
      rc = run_calibrate(cfg, a.chain, a.env, a.surface, a.out_dir, manifest);
    } else if (a.command == "report") {
      rc = run_report(cfg, a.chain, a.env, a.surface, a.out_dir);
    }
    manifest.finish(rc == 0, elapsed());
    return rc;
  } catch (const std::exception& e) {
    manifest.doc["error"] = e.what();
    manifest.finish(false, elapsed());
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Occupied local volatility toolkit"};
  app.require_subcommand(0, 1);
  std::string manifest_in;
  app.add_option("--manifest", manifest_in, "Re-execute a previous run from its manifest")
      ->check(CLI::ExistingFile);

  Args sim_a, price_a, lv_a, cal_a, rep_a;

  auto* sim = app.add_subcommand("simulate", "Simulate a path ensemble");
  sim->add_option("--config", sim_a.config, "Run config JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--surface", sim_a.surface, "Local vol surface CSV")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", sim_a.out_dir, "Output directory")->required();
  sim->add_flag("--paths", sim_a.dump_paths, "Dump the full path grid");

  auto* price = app.add_subcommand("price", "Price an instrument chain");
  price->add_option("--config", price_a.config, "Run config JSON")->required()->check(CLI::ExistingFile);
  price->add_option("--surface", price_a.surface, "Local vol surface CSV")->required()->check(CLI::ExistingFile);
  price->add_option("--instruments", price_a.chain, "Chain CSV")->required()->check(CLI::ExistingFile);
  price->add_option("--out", price_a.out, "Output CSV")->required();

  auto* lv = app.add_subcommand("localvol", "Dupire local vol from an implied surface");
  lv->add_option("--implied", lv_a.implied, "Implied surface CSV")->required()->check(CLI::ExistingFile);
  lv->add_option("--env", lv_a.env, "Market environment JSON")->required()->check(CLI::ExistingFile);
  lv->add_option("--out", lv_a.out, "Output CSV")->required();

  auto* cal = app.add_subcommand("calibrate", "Calibrate the sensitivity function");
  cal->add_option("--chain", cal_a.chain, "Chain CSV")->required()->check(CLI::ExistingFile);
  cal->add_option("--env", cal_a.env, "Market environment JSON")->required()->check(CLI::ExistingFile);
  cal->add_option("--surface", cal_a.surface, "Local vol surface CSV")->required()->check(CLI::ExistingFile);
  cal->add_option("--config", cal_a.config, "Calibration config JSON")->required()->check(CLI::ExistingFile);
  cal->add_option("--out-dir", cal_a.out_dir, "Output directory")->required();

  auto* rep = app.add_subcommand("report", "Price a chain and emit plot data");
  rep->add_option("--chain", rep_a.chain, "Chain CSV")->required()->check(CLI::ExistingFile);
  rep->add_option("--env", rep_a.env, "Market environment JSON")->required()->check(CLI::ExistingFile);
  rep->add_option("--surface", rep_a.surface, "Local vol surface CSV")->required()->check(CLI::ExistingFile);
  rep->add_option("--config", rep_a.config, "Report config JSON")->required()->check(CLI::ExistingFile);
  rep->add_option("--out-dir", rep_a.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (!manifest_in.empty()) {
    try {
      return rerun_manifest(manifest_in);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  if (sim->parsed()) { sim_a.command = "simulate"; return dispatch(sim_a); }
  if (price->parsed()) { price_a.command = "price"; return dispatch(price_a); }
  if (lv->parsed()) { lv_a.command = "localvol"; return dispatch(lv_a); }
  if (cal->parsed()) { cal_a.command = "calibrate"; return dispatch(cal_a); }
  if (rep->parsed()) { rep_a.command = "report"; return dispatch(rep_a); }
  std::cerr << app.help();
  return 2;
}
