// ahpq: BER sweeps, integral/fractional bit searches and profile reports.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ahpq/detectors.hpp"
#include "ahpq/fixed_point.hpp"
#include "ahpq/fpq_env.hpp"
#include "ahpq/harness.hpp"
#include "ahpq/ipq.hpp"
#include "ahpq/ppo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ahpq;

namespace {

// Shared system/detector/sweep flags. Values start from the JSON config
// (if any); flags given on the command line win.
struct Common {
  std::string config_path;
  int n_t = 8;
  int n_r = 128;
  int modulation = 16;
  std::string convention = "rx_power";
  std::uint64_t seed = 1;
  int iterations = 4;
  std::string init = "zero";
  std::string snr = "0:6:1";
  std::uint64_t min_error_events = 100;
  std::uint64_t min_frames = 0;
  std::uint64_t max_frames = 200000;
  int threads = 1;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON config file; flags override its keys");
  app->add_option("--nt", c.n_t, "transmit antennas");
  app->add_option("--nr", c.n_r, "receive antennas");
  app->add_option("--qam", c.modulation, "square QAM order");
  app->add_option("--convention", c.convention, "SNR convention: rx_power | per_symbol");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--iterations", c.iterations, "detector iterations");
  app->add_option("--init", c.init, "initial mean: zero | es");
  app->add_option("--snr", c.snr, "SNR list as A:B:STEP or a single value (dB)");
  app->add_option("--min-error-events", c.min_error_events, "errors per point before stopping");
  app->add_option("--min-frames", c.min_frames, "frames per point at least");
  app->add_option("--max-frames", c.max_frames, "frames per point at most");
  app->add_option("--threads", c.threads, "worker threads");
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed config " + path + ": " + e.what());
  }
}

// Config keys a flag did not override.
template <typename T>
void take(const json& j, const char* key, T& dst, const CLI::App* app, const char* flag) {
  if (j.contains(key) && app->count(flag) == 0) dst = j.at(key).get<T>();
}

void apply_config(Common& c, const CLI::App* app) {
  if (c.config_path.empty()) return;
  const json j = read_json(c.config_path);
  const json sys = j.value("system", json::object());
  take(sys, "n_t", c.n_t, app, "--nt");
  take(sys, "n_r", c.n_r, app, "--nr");
  take(sys, "modulation", c.modulation, app, "--qam");
  take(sys, "snr_convention", c.convention, app, "--convention");
  take(j, "seed", c.seed, app, "--seed");
  const json det = j.value("detector", json::object());
  take(det, "iterations", c.iterations, app, "--iterations");
  take(det, "init", c.init, app, "--init");
  const json sweep = j.value("sweep", json::object());
  take(sweep, "snr", c.snr, app, "--snr");
  take(sweep, "min_error_events", c.min_error_events, app, "--min-error-events");
  take(sweep, "min_frames", c.min_frames, app, "--min-frames");
  take(sweep, "max_frames", c.max_frames, app, "--max-frames");
  take(j, "threads", c.threads, app, "--threads");
}

sim::SystemConfig system_of(const Common& c) {
  sim::SystemConfig s;
  s.n_t = c.n_t;
  s.n_r = c.n_r;
  s.modulation = c.modulation;
  s.snr_convention = sim::parse_snr_convention(c.convention);
  s.seed = c.seed;
  s.validate();
  return s;
}

det::InitMean parse_init(const std::string& s) {
  if (s == "zero") return det::InitMean::kZero;
  if (s == "es") return det::InitMean::kEs;
  throw std::invalid_argument("unknown init '" + s + "' (expected zero or es)");
}

det::DetectorConfig detector_of(const Common& c, det::Variant v) {
  det::DetectorConfig d;
  d.variant = v;
  d.iterations = c.iterations;
  d.init_mean = parse_init(c.init);
  d.constellation = sim::Constellation(c.modulation);
  return d;
}

harness::StopRule stop_of(const Common& c) {
  harness::StopRule r;
  r.min_error_events = c.min_error_events;
  r.min_frames = c.min_frames;
  r.max_frames = c.max_frames;
  return r;
}

/// A file path, or the name of a bundled profile ("table4_ahpq").
fxp::QuantProfile resolve_profile(const std::string& name) {
  if (fs::exists(name)) return fxp::load_profile(name);
  const std::string file = name.ends_with(".json") ? name : name + ".json";
  const std::string bundled = fxp::bundled_profile_path(file);
  if (fs::exists(bundled)) return fxp::load_profile(bundled);
  throw std::runtime_error("no profile file or bundled profile named '" + name + "'");
}

void emit(const std::vector<harness::BerRecord>& records, const std::string& out) {
  if (out.empty() || out == "-") {
    harness::write_csv(std::cout, records);
  } else {
    harness::write_csv(out, records);
    std::cerr << "wrote " << records.size() << " records to " << out << '\n';
  }
}

// ---- ber ----------------------------------------------------------------

struct BerArgs {
  Common common;
  std::vector<std::string> detectors = {"nna"};
  std::string profile;
  std::string out;
  bool per_iteration = false;
};

void run_ber(const BerArgs& a) {
  harness::SweepConfig cfg;
  cfg.system = system_of(a.common);
  cfg.snr_db = harness::parse_snr_range(a.common.snr);
  cfg.stop = stop_of(a.common);
  cfg.threads = a.common.threads;
  cfg.per_iteration = a.per_iteration;
  for (const std::string& name : a.detectors) {
    det::DetectorConfig d = detector_of(a.common, det::parse_variant(name));
    if (!a.profile.empty()) {
      if (d.variant == det::Variant::kAmp) {
        throw std::invalid_argument("--profile does not apply to the floating-point AMP detector");
      }
      d.profile = resolve_profile(a.profile);
    }
    cfg.detectors.push_back({name, d});
  }
  emit(harness::ber_sweep(cfg), a.out);
}

// ---- ipq ----------------------------------------------------------------

struct IpqArgs {
  Common common;
  std::string fractional = "uq_166";
  int uniform_q = -1;
  std::string pool;
  std::uint64_t frames = 2000;
  double eps1 = 1e-4;
  int p_floor = 1;
  std::string variant = "nna";
  std::string out;
};

void run_ipq_cmd(const IpqArgs& a) {
  ipq::IpqConfig cfg;
  cfg.system = system_of(a.common);
  const std::vector<double> snr = harness::parse_snr_range(a.common.snr);
  cfg.system.snr_db = snr.front();
  if (!a.pool.empty()) cfg.pooled_snr_db = harness::parse_snr_range(a.pool);
  cfg.detector = detector_of(a.common, det::parse_variant(a.variant));
  cfg.n_frames = a.frames;
  cfg.eps1 = a.eps1;
  cfg.p_floor = a.p_floor;
  cfg.threads = a.common.threads;
  const fxp::ProfileScope scope =
      cfg.detector.variant == det::Variant::kHfAmp ? fxp::ProfileScope::kHfAmp : fxp::ProfileScope::kNnaAmp;
  const fxp::QuantProfile fractional = a.uniform_q >= 0
                                           ? fxp::QuantProfile::uniform(cfg.p_init, a.uniform_q, scope)
                                           : resolve_profile(a.fractional);
  fxp::QuantProfile profile = harness::run_ipq_job(cfg, fractional);
  profile.id = "IPQ";
  if (a.out.empty()) {
    std::cout << fxp::profile_to_json(profile) << '\n';
  } else {
    fxp::save_profile(profile, a.out);
    std::cerr << "wrote " << a.out << '\n';
  }
  const fxp::ProfileStats st = fxp::profile_stats(profile);
  std::cerr << "avg integral " << st.avg_integral << ", avg fractional " << st.avg_fractional << '\n';
}

// ---- fpq-train / fpq-test ----------------------------------------------

struct FpqArgs {
  Common common;
  double snr_db = 6.0;
  int q_max = 10;
  int l_a = 2;
  int n_ext = 5;
  double eps2 = 0.5;
  std::uint64_t eval_bits = 200000;
  std::string pairing = "bank";
  int episodes = 3000;
  int timesteps = 20;
  int update_every = 10;
  int test_steps = 200;
  double lr = 3e-4;
  std::uint64_t ipq_frames = 2000;
  std::string out_dir = "fpq_out";
  std::string policy;
  bool skip_ipq = false;
};

fpq::EnvConfig env_of(const FpqArgs& a) {
  fpq::EnvConfig e;
  e.q_max = a.q_max;
  e.l_a = a.l_a;
  e.n_ext = a.n_ext;
  e.eps2 = a.eps2;
  e.eval_bits = a.eval_bits;
  e.max_timestep = a.timesteps;
  e.pairing = fpq::parse_pairing(a.pairing);
  e.system = system_of(a.common);
  e.system.snr_db = a.snr_db;
  e.detector = detector_of(a.common, det::Variant::kNnaAmp);
  e.seed = a.common.seed;
  return e;
}

void add_fpq_flags(CLI::App* app, FpqArgs& a) {
  add_common(app, a.common);
  app->add_option("--operating-snr", a.snr_db, "operating SNR in dB");
  app->add_option("--q-max", a.q_max, "largest fractional width");
  app->add_option("--la", a.l_a, "action influence range");
  app->add_option("--n-ext", a.n_ext, "variables adjustable per episode");
  app->add_option("--eps2", a.eps2, "relative BER tolerance");
  app->add_option("--eval-bits", a.eval_bits, "bits per reward evaluation");
  app->add_option("--pairing", a.pairing, "bank | paired | independent");
  app->add_option("--test-steps", a.test_steps, "policy actions per variable when testing");
  app->add_option("--ipq-frames", a.ipq_frames, "frames for integral-bit statistics");
  app->add_flag("--skip-ipq", a.skip_ipq, "emit the fractional widths with p = p_init");
  app->add_option("--out-dir", a.out_dir, "output directory");
}

void report_widths(const fpq::Widths& w) {
  std::cerr << "q:";
  double sum = 0.0;
  for (const int q : w) {
    std::cerr << ' ' << q;
    sum += q;
  }
  std::cerr << "  (avg " << sum / static_cast<double>(w.size()) << ")\n";
}

void run_fpq_train(const FpqArgs& a) {
  fs::create_directories(a.out_dir);
  harness::FpqJobConfig job;
  job.env = env_of(a);
  job.train.max_episodes = a.episodes;
  job.train.max_timestep = a.timesteps;
  job.train.update_every = a.update_every;
  job.train.test_steps = a.test_steps;
  job.train.lr = a.lr;
  job.train.seed = a.common.seed;
  job.ipq.n_frames = a.ipq_frames;
  job.ipq.threads = a.common.threads;
  job.episode_log = (fs::path(a.out_dir) / "episodes.jsonl").string();

  harness::FpqJobResult r = harness::run_fpq_training(job);
  const fs::path dir(a.out_dir);
  r.training.model.policy.save((dir / "policy.json").string());
  r.training.model.value.save((dir / "value.json").string());
  rl::write_reward_history((dir / "reward_history.csv").string(), r.training.reward_history);
  fxp::save_profile(r.fractional, (dir / "fractional.json").string());
  std::cerr << "P_b " << r.p_b << '\n';
  report_widths(r.widths);
  if (a.skip_ipq) {
    std::cerr << "wrote policy, value, reward history and fractional profile to " << a.out_dir << '\n';
    return;
  }
  harness::select_integral_bits(job, r);
  fxp::save_profile(r.profile, (dir / "profile.json").string());
  fpq::EnvConfig gate_env = job.env;
  gate_env.p_b = r.p_b;
  const fpq::GateResult g =
      fpq::evaluate_gate(r.profile, gate_env, 10 * gate_env.eval_bits, fpq::kGateStream);
  std::cerr << "gate at " << g.bits << " bits: relative error " << g.relative_error
            << (g.passed ? " (pass)" : " (FAIL)") << '\n';
  std::cerr << "wrote policy, value, reward history and profiles to " << a.out_dir << '\n';
}

void run_fpq_test(const FpqArgs& a) {
  const nn::Mlp policy = nn::Mlp::load(a.policy);
  const fpq::EnvConfig env = env_of(a);
  if (policy.input_size() != env.state_dim() || policy.output_size() != env.action_count()) {
    throw std::invalid_argument("policy shape does not match --q-max / --la");
  }
  const fpq::Widths w = rl::estimate_bitwidths(policy, env, a.test_steps, a.common.seed);
  report_widths(w);
  fxp::QuantProfile profile = fpq::widths_profile(w, env.p_init);
  if (!a.skip_ipq) {
    ipq::IpqConfig icfg;
    icfg.system = env.system;
    icfg.detector = env.detector;
    icfg.n_frames = a.ipq_frames;
    icfg.threads = a.common.threads;
    profile = harness::run_ipq_job(icfg, profile);
  }
  profile.id = "AHPQ";
  fs::create_directories(a.out_dir);
  const std::string path = (fs::path(a.out_dir) / "profile.json").string();
  fxp::save_profile(profile, path);
  std::cerr << "wrote " << path << '\n';
}

// ---- compare -------------------------------------------------------------

struct CompareArgs {
  Common common;
  std::string a = "table4_ahpq";
  std::string b = "uq_166";
  bool no_sim = false;
  double target = 1e-3;
  std::string out;
};

void run_compare(const CompareArgs& a) {
  harness::ComparisonConfig cfg;
  cfg.system = system_of(a.common);
  cfg.snr_db = harness::parse_snr_range(a.common.snr);
  cfg.stop = stop_of(a.common);
  cfg.detector = detector_of(a.common, det::Variant::kNnaAmp);
  cfg.target_ber = a.target;
  cfg.threads = a.common.threads;
  cfg.simulate = !a.no_sim;
  const harness::ProfileComparison c =
      harness::compare_profiles(resolve_profile(a.a), resolve_profile(a.b), cfg);
  std::cout << harness::format_comparison(c, a.target);
  if (!a.out.empty() && !c.records.empty()) harness::write_csv(a.out, c.records);
}

// ---- reproduce -------------------------------------------------------------

struct ReproArgs {
  Common common;
  std::string figure;
  std::string out_dir = ".";
};

void reproduce(const ReproArgs& a) {
  harness::SweepConfig cfg;
  cfg.system = system_of(a.common);
  cfg.stop = stop_of(a.common);
  cfg.threads = a.common.threads;
  const det::DetectorConfig amp = detector_of(a.common, det::Variant::kAmp);
  const det::DetectorConfig nna = detector_of(a.common, det::Variant::kNnaAmp);
  const det::DetectorConfig hf = detector_of(a.common, det::Variant::kHfAmp);
  auto with = [](det::DetectorConfig d, const fxp::QuantProfile& p) {
    d.profile = p;
    return d;
  };
  const fxp::QuantProfile table4 = resolve_profile("table4_ahpq");
  const fxp::QuantProfile hf_profile = resolve_profile("hfamp_ahpq");
  std::vector<harness::BerRecord> records;

  if (a.figure == "fig5") {
    // BER versus iteration count at 6 dB.
    cfg.snr_db = {6.0};
    cfg.per_iteration = true;
    det::DetectorConfig amp6 = amp, nna6 = nna;
    amp6.iterations = nna6.iterations = 6;
    cfg.detectors = {{"amp", amp6}, {"nna", nna6}};
    records = harness::ber_sweep(cfg);
  } else if (a.figure == "fig6") {
    cfg.snr_db = harness::parse_snr_range("0:6:1");
    cfg.detectors = {{"amp", amp}, {"nna", nna}, {"ahpq", with(nna, table4)}};
    records = harness::ber_sweep(cfg);
  } else if (a.figure == "fig8") {
    cfg.snr_db = harness::parse_snr_range("0:6:1");
    cfg.detectors = {{"nna", nna}};
    for (int q = 4; q <= 6; ++q) {
      cfg.detectors.push_back({"uq_1-6-" + std::to_string(q), with(nna, fxp::QuantProfile::uniform(6, q))});
    }
    records = harness::ber_sweep(cfg);
  } else if (a.figure == "fig10") {
    // Node compression for N_t = 8, 16, 32; the curves move right by about
    // 3 dB per doubling under the received-power convention.
    const std::vector<std::pair<int, std::string>> arms = {{8, "0:6:1"}, {16, "3:9:1"}, {32, "6:12:1"}};
    for (const auto& [nt, range] : arms) {
      harness::SweepConfig c = cfg;
      c.system.n_t = nt;
      c.snr_db = harness::parse_snr_range(range);
      const std::string tag = "_nt" + std::to_string(nt);
      c.detectors = {{"nna" + tag, nna},
                     {"nna_q" + tag, with(nna, table4)},
                     {"hf_q" + tag, with(hf, hf_profile)}};
      auto part = harness::ber_sweep(c);
      records.insert(records.end(), part.begin(), part.end());
    }
  } else if (a.figure == "fig11") {
    cfg.snr_db = harness::parse_snr_range("0:6:1");
    det::DetectorConfig narrow = with(hf, hf_profile);
    narrow.pla1 = det::pla_build(det::PlaTarget::kLogisticRecip, -2.0, 0.0, 1,
                                 {fxp::QuantScheme(1, 3), fxp::QuantScheme(1, 3)});
    cfg.detectors = {{"nna_q", with(nna, table4)},
                     {"hf_pla_-4_0_1", with(hf, hf_profile)},
                     {"hf_pla_-2_0_1", narrow}};
    records = harness::ber_sweep(cfg);
  } else {
    throw std::invalid_argument("unknown figure '" + a.figure +
                                "' (expected fig5, fig6, fig8, fig10 or fig11)");
  }
  fs::create_directories(a.out_dir);
  emit(records, (fs::path(a.out_dir) / (a.figure + ".csv")).string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ahpq: hybrid-precision quantization lab for message-passing MIMO detectors"};
  app.require_subcommand(1);

  BerArgs ber;
  CLI::App* ber_cmd = app.add_subcommand("ber", "Monte Carlo BER sweep");
  add_common(ber_cmd, ber.common);
  ber_cmd->add_option("--detector", ber.detectors, "amp | nna | hf (repeatable)");
  ber_cmd->add_option("--profile", ber.profile, "quantization profile file or bundled name");
  ber_cmd->add_option("--out", ber.out, "CSV output (default stdout)");
  ber_cmd->add_flag("--per-iteration", ber.per_iteration, "also report every iteration");

  IpqArgs ipq_args;
  CLI::App* ipq_cmd = app.add_subcommand("ipq", "integral bits from value statistics");
  add_common(ipq_cmd, ipq_args.common);
  ipq_args.common.snr = "6";
  ipq_cmd->add_option("--fractional", ipq_args.fractional, "profile supplying q (file or bundled name)");
  ipq_cmd->add_option("--uniform-q", ipq_args.uniform_q, "use the same q for every variable");
  ipq_cmd->add_option("--pool", ipq_args.pool, "pool statistics over A:B:STEP instead of --snr");
  ipq_cmd->add_option("--frames", ipq_args.frames, "frames per SNR point");
  ipq_cmd->add_option("--eps1", ipq_args.eps1, "tail-mass threshold");
  ipq_cmd->add_option("--p-floor", ipq_args.p_floor, "smallest p emitted");
  ipq_cmd->add_option("--detector", ipq_args.variant, "nna | hf");
  ipq_cmd->add_option("--out", ipq_args.out, "profile JSON output (default stdout)");

  FpqArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("fpq-train", "train the fractional-bit agent");
  add_fpq_flags(train_cmd, train_args);
  train_cmd->add_option("--episodes", train_args.episodes, "training episodes");
  train_cmd->add_option("--timesteps", train_args.timesteps, "steps per episode");
  train_cmd->add_option("--update-every", train_args.update_every, "episodes per PPO update");
  train_cmd->add_option("--lr", train_args.lr, "Adam learning rate");

  FpqArgs test_args;
  CLI::App* test_cmd = app.add_subcommand("fpq-test", "estimate widths with a trained policy");
  add_fpq_flags(test_cmd, test_args);
  test_cmd->add_option("--policy", test_args.policy, "policy checkpoint")->required();

  CompareArgs cmp;
  CLI::App* cmp_cmd = app.add_subcommand("compare", "bitwidth and SNR-loss report for two profiles");
  add_common(cmp_cmd, cmp.common);
  cmp_cmd->add_option("--a", cmp.a, "candidate profile (file or bundled name)");
  cmp_cmd->add_option("--b", cmp.b, "baseline profile (file or bundled name)");
  cmp_cmd->add_flag("--no-sim", cmp.no_sim, "bitwidth table only");
  cmp_cmd->add_option("--target-ber", cmp.target, "BER at which the SNR loss is read");
  cmp_cmd->add_option("--out", cmp.out, "CSV of the underlying sweeps");

  ReproArgs repro;
  CLI::App* repro_cmd = app.add_subcommand("reproduce", "canned sweeps: fig5 fig6 fig8 fig10 fig11");
  add_common(repro_cmd, repro.common);
  repro_cmd->add_option("figure", repro.figure, "figure name")->required();
  repro_cmd->add_option("--out-dir", repro.out_dir, "directory for <figure>.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ber_cmd->parsed()) {
      apply_config(ber.common, ber_cmd);
      run_ber(ber);
    } else if (ipq_cmd->parsed()) {
      apply_config(ipq_args.common, ipq_cmd);
      run_ipq_cmd(ipq_args);
    } else if (train_cmd->parsed()) {
      apply_config(train_args.common, train_cmd);
      run_fpq_train(train_args);
    } else if (test_cmd->parsed()) {
      apply_config(test_args.common, test_cmd);
      run_fpq_test(test_args);
    } else if (cmp_cmd->parsed()) {
      apply_config(cmp.common, cmp_cmd);
      run_compare(cmp);
    } else if (repro_cmd->parsed()) {
      apply_config(repro.common, repro_cmd);
      reproduce(repro);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
