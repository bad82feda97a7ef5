#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "etmpc/acceptance.hpp"
#include "etmpc/costmodel.hpp"
#include "etmpc/error.hpp"
#include "etmpc/kernels.hpp"
#include "etmpc/netio.hpp"
#include "etmpc/problem_io.hpp"
#include "etmpc/sim.hpp"

using namespace etmpc;

namespace {

/// Bad flags or an invalid problem; maps to exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Loaded {
  MpcProblem problem;
  CondensedQp qp;
};

Loaded load(const std::string& name) {
  MpcProblem p;
  try {
    p = load_problem(resolve_problem_path(name));
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const ValidationReport report = validate(p);
  if (!report.ok()) throw UsageError("problem '" + p.name + "' is invalid:\n" + report.to_string());
  return {p, condense(p)};
}

Vector parse_state(const std::string& text, Eigen::Index n) {
  std::vector<double> values;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("--x0: '" + item + "' is not a number");
    }
  }
  if (values.size() == 1 && n > 1) values.assign(static_cast<std::size_t>(n), values.front());
  if (static_cast<Eigen::Index>(values.size()) != n)
    throw UsageError("--x0 needs " + std::to_string(n) + " comma-separated values");
  return Eigen::Map<Vector>(values.data(), n);
}

template <typename F>
auto usage(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == Errc::invalid_argument) throw UsageError(e.what());
    throw;
  }
}

/// stdout unless a path is given.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw UsageError("cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

struct Flags {
  std::string problem = "four_mass_oscillator";
  std::string variant = "A1";
  std::string backend = "lu";
  std::string precision = "full";
  std::string transport = "loopback";
  std::string address = "127.0.0.1:5717";
  std::string output;
  std::string histogram;
  std::string x0;
  std::uint64_t seed = 20160601;
  int count = 100;
  int max_steps = 400;
  int node = 1;
  int nodes = 16;
  unsigned threads = 0;
};

int cmd_condense(const Flags& f) {
  const Loaded l = load(f.problem);
  const auto& d = l.qp.dims;
  const Matrix P = terminal_weight(l.problem);
  std::cout << "problem " << l.problem.name << "\n"
            << "n " << d.n << "\nm " << d.m << "\nN " << d.N << "\nmN " << d.mN() << "\nq " << d.q << "\n"
            << "terminal weight DARE residual " << dare_residual(P, l.problem.A, l.problem.B, l.problem.Q, l.problem.R)
            << "\n"
            << "H symmetric " << ((l.qp.H - l.qp.H.transpose()).cwiseAbs().maxCoeff() == 0.0 ? "yes" : "no") << "\n"
            << "kernels " << kernels::isa_name(kernels::active_isa()) << "\n";
  return 0;
}

int cmd_simulate(const Flags& f) {
  const Loaded l = load(f.problem);
  SimConfig c;
  c.variant = usage([&] { return parse_variant(f.variant); });
  c.backend = usage([&] { return parse_backend(f.backend); });
  c.codec = usage([&] { return parse_codec(f.precision); });
  c.max_steps = f.max_steps;
  c.x0 = f.x0.empty() ? sample_feasible_states(l.problem, l.qp, 1, f.seed).front() : parse_state(f.x0, l.problem.n());

  Trajectory t;
  if (f.transport == "loopback") {
    t = simulate_event_triggered(l.problem, l.qp, c);
  } else if (f.transport == "tcp") {
    net::TcpTransport transport(f.address);
    net::LocalClient client(transport, static_cast<std::uint16_t>(f.node), l.qp.dims, c.variant, c.codec);
    t = simulate_event_triggered(l.problem, l.qp, c, &client);
  } else {
    throw UsageError("--transport must be loopback or tcp");
  }
  Output out(f.output);
  write_trajectory_csv(out.stream(), t);
  const Trajectory ref = simulate_classical(l.problem, l.qp, c);
  std::cerr << t.steps.size() << " steps, " << t.events << " events, " << t.frames_sent << " requests, "
            << (t.converged ? "converged" : "not converged") << ", max deviation from per-step QP "
            << max_state_deviation(t, ref) << "\n";
  for (const auto& line : t.log) std::cerr << line << "\n";
  if (t.aborted) {
    std::cerr << "aborted: " << *t.aborted << "\n";
    return 2;
  }
  return 0;
}

int cmd_batch(const Flags& f) {
  const Loaded l = load(f.problem);
  SimConfig c;
  c.backend = usage([&] { return parse_backend(f.backend); });
  c.codec = usage([&] { return parse_codec(f.precision); });
  c.max_steps = f.max_steps;
  std::vector<Variant> variants;
  if (f.variant == "all")
    variants = {Variant::A1, Variant::A2, Variant::A3, Variant::A4};
  else
    variants = {usage([&] { return parse_variant(f.variant); })};
  if (f.count < 1) throw UsageError("--count must be at least 1");
  const BatchReport rep = run_batch(l.problem, l.qp, f.count, f.seed, variants, c, f.threads);
  Output out(f.output);
  write_batch_csv(out.stream(), rep);
  if (!f.histogram.empty()) {
    Output hist(f.histogram);
    write_histogram_csv(hist.stream(), rep);
  }
  bool failed = false;
  for (const auto& a : rep.variants)
    for (const auto& msg : a.failures) {
      std::cerr << variant_name(a.variant) << " " << msg << "\n";
      failed = true;
    }
  return failed ? 2 : 0;
}

int cmd_analyze(const Flags& f) {
  const Loaded l = load(f.problem);
  Output out(f.output);
  write_analysis_csv(out.stream(), l.qp.dims.n, l.qp.dims.m, l.qp.dims.N);
  return 0;
}

int cmd_compare(const Flags& f) {
  const Loaded l = load(f.problem);
  const auto& d = l.qp.dims;
  std::cout << compare_encodings(d.n, d.m, d.N).to_string();
  return 0;
}

std::sig_atomic_t volatile g_stop = 0;

int cmd_serve(const Flags& f) {
  const Loaded l = load(f.problem);
  net::NodeConfig cfg;
  cfg.qp = std::make_shared<CondensedQp>(l.qp);
  cfg.variant = usage([&] { return parse_variant(f.variant); });
  cfg.codec = usage([&] { return parse_codec(f.precision); });
  net::CentralNode central;
  for (int id = 1; id <= f.nodes; ++id) central.register_node(static_cast<std::uint16_t>(id), cfg);
  net::TcpServer server(central, f.address);
  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  server.start();
  std::cerr << "serving " << l.problem.name << " (" << variant_name(cfg.variant) << ", " << codec_name(cfg.codec)
            << ") for nodes 1.." << f.nodes << " on port " << server.port() << "\n";
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  std::cerr << central.requests_served() << " requests served\n";
  return 0;
}

int cmd_verify(const Flags& f) {
  AcceptanceOptions opt;
  opt.count = f.count;
  opt.seed = f.seed;
  opt.threads = f.threads;
  bool ok = true;
  for (const auto& r : run_acceptance(opt)) {
    std::cout << format_result(r) << "\n";
    ok = ok && r.pass;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-triggered networked MPC toolkit"};
  app.require_subcommand(1);
  Flags f;

  auto add_problem = [&](CLI::App* c) {
    c->add_option("--problem", f.problem, "Bundled problem name or path to a problem file")->capture_default_str();
  };
  auto add_encoding = [&](CLI::App* c, bool allow_all) {
    c->add_option("--variant", f.variant, allow_all ? "A1..A4 or all" : "A1..A4")->capture_default_str();
    c->add_option("--precision", f.precision, "Downlink reals: full or half")->capture_default_str();
  };

  auto* condense_cmd = app.add_subcommand("condense", "Print the condensed QP dimensions");
  add_problem(condense_cmd);

  auto* sim = app.add_subcommand("simulate", "Run one event-triggered closed loop, per-step CSV");
  add_problem(sim);
  add_encoding(sim, false);
  sim->add_option("--backend", f.backend, "naive or lu")->capture_default_str();
  sim->add_option("--x0", f.x0, "Initial state, comma separated (one value is broadcast)");
  sim->add_option("--seed", f.seed, "Seed for a sampled initial state when --x0 is absent")->capture_default_str();
  sim->add_option("--max-steps", f.max_steps)->capture_default_str();
  sim->add_option("--transport", f.transport, "loopback or tcp")->capture_default_str();
  sim->add_option("--address", f.address, "Central node host:port for tcp")->capture_default_str();
  sim->add_option("--node", f.node, "Node id for tcp")->capture_default_str();
  sim->add_option("--output", f.output, "CSV path (default stdout)");

  auto* batch = app.add_subcommand("batch", "Closed loops from sampled initial states, aggregate CSV");
  add_problem(batch);
  f.variant = "A1";
  add_encoding(batch, true);
  batch->add_option("--backend", f.backend, "naive or lu")->capture_default_str();
  batch->add_option("--count", f.count)->capture_default_str();
  batch->add_option("--seed", f.seed)->capture_default_str();
  batch->add_option("--max-steps", f.max_steps)->capture_default_str();
  batch->add_option("--threads", f.threads, "0 = all cores")->capture_default_str();
  batch->add_option("--output", f.output, "Aggregate CSV path (default stdout)");
  batch->add_option("--histogram", f.histogram, "q_A histogram CSV path");

  auto* analyze = app.add_subcommand("analyze", "Bit and flop counts for every variant and q_A, CSV");
  add_problem(analyze);
  analyze->add_option("--output", f.output, "CSV path (default stdout)");

  auto* compare = app.add_subcommand("compare-encodings", "Bit-count comparison of the four encodings");
  add_problem(compare);

  auto* serve = app.add_subcommand("serve", "Run the central node on a TCP port");
  add_problem(serve);
  add_encoding(serve, false);
  serve->add_option("--address", f.address, "host:port, port 0 picks a free one")->capture_default_str();
  serve->add_option("--nodes", f.nodes, "Register node ids 1..nodes")->capture_default_str();

  auto* verify = app.add_subcommand("verify", "Run the acceptance suite");
  verify->add_option("--count", f.count)->capture_default_str();
  verify->add_option("--seed", f.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*condense_cmd) return cmd_condense(f);
    if (*sim) return cmd_simulate(f);
    if (*batch) return cmd_batch(f);
    if (*analyze) return cmd_analyze(f);
    if (*compare) return cmd_compare(f);
    if (*serve) return cmd_serve(f);
    if (*verify) return cmd_verify(f);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error (" << errc_name(e.code()) << "): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
