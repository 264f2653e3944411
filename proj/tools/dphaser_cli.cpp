// dphaser: simulate / verify / bench driver.
// Exit codes: 0 success, 1 usage error, 2 violation or fault, 3 incomplete.
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dphaser/bench.hpp"
#include "dphaser/phaser.hpp"
#include "dphaser/topology.hpp"
#include "dphaser/verifier.hpp"

using namespace dphaser;

namespace {

constexpr int kOk = 0, kUsage = 1, kViolation = 2, kIncomplete = 3;

// "--modes 4sw,2s,2w" -> [b,b,b,b,s,s,w,w]; bare "sw"/"b"/"s"/"w" tokens count 1.
std::optional<std::vector<Mode>> parse_modes(const std::string& spec) {
  std::vector<Mode> out;
  std::stringstream ss(spec);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    size_t i = 0;
    while (i < tok.size() && isdigit(static_cast<unsigned char>(tok[i]))) ++i;
    int count = i ? std::stoi(tok.substr(0, i)) : 1;
    std::string m = tok.substr(i);
    Mode mode;
    if (m == "s") mode = Mode::SignalOnly;
    else if (m == "w") mode = Mode::WaitOnly;
    else if (m == "b" || m == "sw") mode = Mode::SignalWait;
    else return std::nullopt;
    if (count < 1) return std::nullopt;
    out.insert(out.end(), count, mode);
  }
  if (out.empty()) return std::nullopt;
  return out;
}

std::optional<SchedulePolicy> parse_policy(const std::string& name, uint64_t seed) {
  if (name == "fifo-global") return SchedulePolicy::fifo_global();
  if (name == "seeded-random") return SchedulePolicy::seeded_random(seed);
  if (name.rfind("adversarial:", 0) == 0) {
    auto kind = kind_from_name(name.substr(12));
    if (!kind) return std::nullopt;
    return SchedulePolicy::adversarial_on(*kind);
  }
  return std::nullopt;
}

bool write_out(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return true;
  }
  std::ofstream f(path);
  f << content;
  return static_cast<bool>(f);
}

int post_run_status(const SimWorld& w) {
  for (const auto& f : w.faults)
    std::cerr << "fault: " << fault_name(f.kind) << " at node " << f.node << ": " << f.detail
              << "\n";
  if (!w.faults.empty()) return kViolation;
  bool stalled = false;
  for (const auto& [id, n] : w.nodes) {
    if (n.mode == Mode::Sentinel || n.dropped) continue;
    if (n.plan.drop_after || (!n.pending_wait && n.task_phase >= n.plan.run_phases)) {
      if (!n.plan.drop_after) continue;
    }
    std::cerr << "task " << id << " did not finish (phase " << n.task_phase << ")\n";
    stalled = true;
  }
  std::vector<std::string> errs;
  for (ListId list : {ListId::Scsl, ListId::Snsl})
    for (const auto& e : validate_topology(w, list)) errs.push_back(e);
  for (const auto& e : errs) std::cerr << "topology: " << e << "\n";
  if (stalled || !errs.empty()) return kViolation;
  return kOk;
}

int cmd_simulate(const std::string& scenario, int n, const std::string& modes_spec, Phase phases,
                 double p, uint64_t seed, const std::string& policy_name, const std::string& out) {
  SimWorld w;
  if (!scenario.empty()) {
    try {
      w = make_scenario(scenario).world;
    } catch (const std::exception& e) {
      std::cerr << e.what() << "\n";
      return kUsage;
    }
  } else {
    auto modes = modes_spec.empty() ? std::vector<Mode>(n, Mode::SignalWait)
                                    : parse_modes(modes_spec).value_or(std::vector<Mode>{});
    if (modes.empty() || (n > 0 && static_cast<int>(modes.size()) != n)) {
      std::cerr << "bad --modes (use e.g. \"4sw,2s,2w\"; --n must match when given)\n";
      return kUsage;
    }
    PhaserSpec spec;
    spec.modes = modes;
    spec.phases = phases;
    spec.p = p;
    spec.seed = seed;
    w = phaser_new(spec);
  }
  auto policy = parse_policy(policy_name, seed);
  if (!policy) {
    std::cerr << "unknown --policy " << policy_name << "\n";
    return kUsage;
  }
  w.policy = *policy;
  w.rng.seed(seed);

  bool scenario_mode = !scenario.empty();
  bool complete;
  if (scenario_mode) {
    complete = true;
    for (;;) {
      if (!w.run_to_quiescence(1u << 24)) { complete = false; break; }
      if (!inject_pending(w)) break;
    }
  } else {
    complete = run_phaser(w, 1u << 24);
  }
  if (!out.empty()) write_trace_jsonl(w, out);
  if (!complete) {
    std::cerr << "step limit exhausted before quiescence\n";
    return kIncomplete;
  }
  int status = post_run_status(w);
  std::cerr << "delivered " << w.delivered << " messages; "
            << (status == kOk ? "ok" : "violations found") << "\n";
  return status;
}

int cmd_verify(const std::string& scenario, uint64_t depth, const std::string& decompose,
               const std::string& mutation_name_arg, const std::string& out) {
  Mutation mut = Mutation::None;
  if (!mutation_name_arg.empty()) {
    auto m = mutation_from_name(mutation_name_arg);
    if (!m) {
      std::cerr << "unknown --mutation " << mutation_name_arg << "\n";
      return kUsage;
    }
    mut = *m;
  }
  Scenario sc;
  try {
    sc = make_scenario(scenario, mut);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  }
  VerifyOptions opt;
  opt.max_depth = depth;

  std::vector<std::pair<std::string, VerifyResult>> reports;
  if (decompose.empty()) {
    reports.push_back({"all", verify(sc, opt)});
  } else {
    std::stringstream ss(decompose);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      auto kind = kind_from_name(tok);
      if (!kind) {
        std::cerr << "unknown message kind " << tok << "\n";
        return kUsage;
      }
      VerifyOptions dopt = opt;
      dopt.decompose = true;
      dopt.decompose_kind = *kind;
      reports.push_back({tok, verify(make_scenario(scenario, mut), dopt)});
    }
  }

  std::string body;
  bool any_violation = false, any_truncated = false;
  for (const auto& [kind, r] : reports) {
    body += verify_report_json(kind, r, depth) + "\n";
    any_violation |= !r.ok;
    any_truncated |= r.truncated;
    std::cerr << kind << ": states_visited=" << r.explored << (r.ok ? " ok" : " VIOLATION")
              << (r.truncated ? " (truncated)" : "") << "\n";
    if (!r.ok) {
      uint64_t end_digest = 0;
      auto errs = replay(make_scenario(scenario, mut), r.counterexample, 1u << 20, &end_digest);
      std::cerr << "  " << (r.errors.empty() ? "" : r.errors[0]) << "\n"
                << "  counterexample: " << r.counterexample.size() << " deliveries, replay "
                << (!errs.empty() && end_digest == r.violation_digest ? "reproduces digest "
                                                                      : "DID NOT reproduce ")
                << std::hex << r.violation_digest << std::dec << "\n";
    }
  }
  if (!write_out(out, body)) {
    std::cerr << "cannot write " << out << "\n";
    return kUsage;
  }
  if (any_violation) return kViolation;
  if (any_truncated) return kIncomplete;
  return kOk;
}

int cmd_bench(std::vector<int> ns, std::vector<int> cs, int seeds, double p,
              const std::string& out) {
  std::vector<BenchRow> rows;
  for (auto& r : bench_depth(ns, seeds, p)) rows.push_back(r);
  for (auto& r : bench_insert(ns, seeds, p)) rows.push_back(r);
  for (auto& r : bench_delete(ns, seeds, p)) rows.push_back(r);
  auto promote = bench_promote(cs, seeds, p);
  std::vector<std::pair<int, double>> pts;
  for (auto& r : promote) {
    rows.push_back(r);
    pts.push_back({r.c, r.value});
  }
  if (pts.size() >= 2) {
    auto [a, b] = fit_log2(pts);
    rows.push_back({"promote-fit", 0, 0, p, seeds, "a_log2C", a, 0});
    rows.push_back({"promote-fit", 0, 0, p, seeds, "b_const", b, 0});
  }
  if (!write_out(out, bench_csv(rows))) {
    std::cerr << "cannot write " << out << "\n";
    return kUsage;
  }
  for (const auto& r : rows)
    if (r.bound > 0 && r.value > r.bound) {
      std::cerr << r.kind << " n=" << r.n << " exceeded bound: " << r.value << " > " << r.bound
                << "\n";
      return kViolation;
    }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "dphaser: distributed phaser protocol simulator, verifier, and benchmark driver.\n"
      "Exit codes: 0 success, 1 usage, 2 violation/fault, 3 incomplete."};
  app.require_subcommand(1);

  std::string scenario, modes, policy = "fifo-global", out, decompose, mutation;
  int n = 0, seeds = 100;
  Phase phases = 1;
  double p = 0.5;
  uint64_t seed = 1, depth = 256;
  std::vector<int> ns{16, 64, 256, 1024};
  std::vector<int> cs{4, 16, 64};

  auto* sim = app.add_subcommand(
      "simulate", "Run a team or a named scenario to quiescence and emit a JSONL trace");
  sim->add_option("--scenario", scenario,
                  "built-in scenario: one-phase, spawn-during-phase, delete-during-phase, "
                  "promote-race, mixed (overrides --n/--modes)");
  sim->add_option("--n", n, "team size (tasks, excluding sentinels)");
  sim->add_option("--modes", modes, "mode mix, e.g. \"4sw,2s,2w\" (s=signal, w=wait, sw|b=both)");
  sim->add_option("--phases", phases, "phases to run")->check(CLI::PositiveNumber);
  sim->add_option("--p", p, "skip-list level probability")->check(CLI::Range(0.0, 0.99));
  sim->add_option("--seed", seed, "RNG seed (heights and random policy)");
  sim->add_option("--policy", policy,
                  "fifo-global | seeded-random | adversarial:<MSG_KIND>");
  sim->add_option("--out", out, "trace output path (JSONL, one delivery per line)");

  auto* ver = app.add_subcommand("verify",
                                 "Bounded exhaustive interleaving verification of a scenario");
  ver->add_option("--scenario", scenario, "scenario to verify")->required();
  ver->add_option("--depth", depth, "max deliveries along one schedule");
  ver->add_option("--decompose", decompose,
                  "comma list of message kinds; one decomposed pass per kind "
                  "(e.g. SIGNAL,INSERT_SEARCH)");
  ver->add_option("--mutation", mutation,
                  "seeded defect: drop-ack, early-forward, skip-freeze, wrong-reparent, "
                  "phase-off-by-one");
  ver->add_option("--out", out, "report output path (JSON, one report object per line)");

  auto* ben = app.add_subcommand(
      "bench",
      "Complexity sweeps. CSV schema: kind,n,c,p,seeds,metric,value,bound where kind is "
      "depth|insert|delete|promote|promote-fit, n the team size, c the promote sweep size, "
      "metric in {avg_depth, insert_msgs, delete_msgs, promote_msgs, a_log2C, b_const}, "
      "value the mean over seeds, and bound the acceptance bound (0 = informational).");
  ben->add_option("--n", ns, "team sizes for depth/insert/delete sweeps");
  ben->add_option("--c", cs, "team sizes for the promotion sweep");
  ben->add_option("--seeds", seeds, "seeds per configuration")->check(CLI::PositiveNumber);
  ben->add_option("--p", p, "skip-list level probability")->check(CLI::Range(0.0, 0.99));
  ben->add_option("--out", out, "CSV output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (sim->parsed()) {
    if (scenario.empty() && n <= 0 && modes.empty()) {
      std::cerr << "simulate needs --scenario or --n/--modes\n";
      return kUsage;
    }
    return cmd_simulate(scenario, n, modes, phases, p, seed, policy, out);
  }
  if (ver->parsed()) return cmd_verify(scenario, depth, decompose, mutation, out);
  return cmd_bench(ns, cs, seeds, p, out);
}
