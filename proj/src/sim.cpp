#include "etmpc/sim.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <thread>

#include "etmpc/error.hpp"

namespace etmpc {

namespace {

/// Residual-based active set for a received U*, booked as the extra A3 work.
/// Under binary16 every row gets slack for the rounding of U*.
ActiveSet identify_received(const CondensedQp& qp, const Vector& u, const Vector& x, RealCodec codec, double eps,
                            FlopCounter* counter) {
  BucketScope scope(counter, FlopCounter::Bucket::matrix);
  const Matrix gu = counted::multiply(qp.G, Matrix(u), counter);
  const Matrix ex = counted::multiply(qp.E, Matrix(x), counter);
  const Matrix r = counted::subtract(counted::subtract(gu, ex, counter), Matrix(qp.w), counter);
  const Vector rounding = codec == RealCodec::binary16 ? Vector(qp.G.cwiseAbs() * u.cwiseAbs() * std::ldexp(2.0, -11))
                                                       : Vector::Zero(qp.q());
  std::vector<std::size_t> rows;
  for (Eigen::Index i = 0; i < qp.q(); ++i)
    if (std::abs(r(i, 0)) <= std::max(eps, rounding(i))) rows.push_back(static_cast<std::size_t>(i));
  if (static_cast<Eigen::Index>(rows.size()) > qp.dims.mN())
    throw Error(Errc::degenerate_active_set, "more rows at equality than decision variables");
  return ActiveSet(static_cast<std::size_t>(qp.q()), std::move(rows));
}

class StopRule {
 public:
  explicit StopRule(const SimConfig& c) : eps_(c.stop_eps), needed_(c.stop_steps) {}
  /// Feeds x(k+1); true once the run should end.
  bool done(const Vector& x_next) {
    if (needed_ <= 0) return false;
    run_ = x_next.lpNorm<Eigen::Infinity>() <= eps_ ? run_ + 1 : 0;
    return run_ >= needed_;
  }

 private:
  double eps_;
  int needed_;
  int run_ = 0;
};

Vector plant_step(const MpcProblem& p, const SimConfig& c, int k, const Vector& x, const Vector& u, Vector* predicted) {
  Vector next = p.A * x + p.B * u;
  if (predicted) *predicted = next;
  if (c.disturbance) next += c.disturbance(k, x);
  return next;
}

void check_config(const MpcProblem& p, const SimConfig& c) {
  if (c.x0.size() != p.n()) throw Error(Errc::dimension_mismatch, "x0 has the wrong length");
  if (c.max_steps < 1) throw Error(Errc::invalid_argument, "max_steps must be positive");
}

std::shared_ptr<const CondensedQp> borrow(const CondensedQp& qp) {
  return std::shared_ptr<const CondensedQp>(std::shared_ptr<const CondensedQp>(), &qp);
}

}  // namespace

Trajectory simulate_event_triggered(const MpcProblem& problem, const CondensedQp& qp, const SimConfig& config,
                                    net::LocalClient* client) {
  check_config(problem, config);
  std::optional<net::CentralNode> own_central;
  std::optional<net::LoopbackTransport> own_transport;
  std::optional<net::LocalClient> own_client;
  if (!client) {
    own_central.emplace();
    own_central->register_node(1, net::NodeConfig{borrow(qp), config.variant, config.codec, config.qp_options});
    own_transport.emplace(*own_central);
    own_client.emplace(*own_transport, 1, qp.dims, config.variant, config.codec);
    client = &*own_client;
  }
  if (client->variant() != config.variant || client->codec() != config.codec)
    throw Error(Errc::invalid_argument, "client encoding does not match the simulation config");
  const std::uint64_t sent0 = client->transport().frames_sent(), recv0 = client->transport().frames_received();

  Trajectory traj;
  StopRule stop(config);
  std::optional<Region> region;
  bool need_event = true;
  Vector x = config.x0, event_state = config.x0;

  // Installs the law for x(k) from a request at `event_state`. Returns false
  // when the event was degenerate and step k must fall back to a local QP.
  auto install = [&](StepRecord& rec) -> bool {
    rec.event = true;
    ++traj.events;
    FlopCounter* counter = config.backend == BackendKind::naive_inverse ? &rec.instrumented : nullptr;
    try {
      net::LawReply reply = client->request_law(event_state);
      rec.bits = reply.received_bits;
      rec.frame_bytes = static_cast<std::int64_t>(reply.frame_bytes);
      if (config.sample_period > 0 && reply.latency_seconds > config.sample_period) ++traj.slow_replies;
      switch (config.variant) {
        case Variant::A1:
          region = build_region(qp, reply.active, config.backend, counter);
          break;
        case Variant::A2:
          if (config.verify_phi && !verify_phi(qp, reply.active, reply.phi, 1e-2))
            traj.log.push_back("step " + std::to_string(rec.k) + ": received Phi disagrees with local recomputation");
          region = build_region_with_phi(qp, reply.active, reply.phi, counter);
          break;
        case Variant::A3: {
          const ActiveSet aset =
              identify_received(qp, reply.u_star, event_state, config.codec, config.qp_options.eps_active, counter);
          region = build_region(qp, aset, config.backend, counter);
          break;
        }
        case Variant::A4:
          region = std::move(reply.region);
          break;
      }
      if (config.variant != Variant::A4) {
        rec.q_a = static_cast<std::int64_t>(region->active.size());
        const Dims d{qp.dims.n, qp.dims.m, qp.dims.N, qp.dims.q, rec.q_a};
        const CostReport cost = cost_report(config.variant, d);
        rec.analytic_inv = cost.flops_inv;
        rec.analytic_mat = cost.flops_mat;
        rec.analytic_flops = cost.flops;
      }
      return true;
    } catch (const Error& e) {
      if (e.code() != Errc::degenerate_active_set && e.code() != Errc::rank_deficient) throw;
      region.reset();
      traj.log.push_back("step " + std::to_string(rec.k) + ": degenerate event, local QP fallback (" + e.what() + ")");
      return false;
    }
  };

  try {
    for (int k = 0; k < config.max_steps; ++k) {
      StepRecord rec;
      rec.k = k;
      rec.x = x;
      bool have_law = region.has_value();
      if (need_event) {
        have_law = install(rec);
        need_event = false;
      }
      if (have_law) {
        rec.u = evaluate_law(*region, x);
      } else {
        rec.u = solve_qp(qp, x, config.qp_options).u_star.head(qp.m());
        rec.fallback = true;
        ++traj.fallbacks;
      }
      Vector predicted;
      const Vector next = plant_step(problem, config, k, x, rec.u, &predicted);
      traj.steps.push_back(std::move(rec));
      x = next;
      if (stop.done(x)) {
        traj.converged = true;
        break;
      }
      if (!have_law || !contains(*region, predicted)) {
        need_event = true;
        event_state = predicted;
      }
    }
  } catch (const Error& e) {
    traj.aborted = std::string(errc_name(e.code())) + ": " + e.what();
  }
  traj.x_final = x;
  traj.frames_sent = client->transport().frames_sent() - sent0;
  traj.frames_received = client->transport().frames_received() - recv0;
  return traj;
}

Trajectory simulate_classical(const MpcProblem& problem, const CondensedQp& qp, const SimConfig& config) {
  check_config(problem, config);
  Trajectory traj;
  StopRule stop(config);
  Vector x = config.x0;
  try {
    for (int k = 0; k < config.max_steps; ++k) {
      StepRecord rec;
      rec.k = k;
      rec.x = x;
      const QpSolution sol = solve_qp(qp, x, config.qp_options);
      rec.u = sol.u_star.head(qp.m());
      rec.q_a = static_cast<std::int64_t>(sol.active.size());
      const Vector next = plant_step(problem, config, k, x, rec.u, nullptr);
      traj.steps.push_back(std::move(rec));
      x = next;
      if (stop.done(x)) {
        traj.converged = true;
        break;
      }
    }
  } catch (const Error& e) {
    traj.aborted = std::string(errc_name(e.code())) + ": " + e.what();
  }
  traj.x_final = x;
  return traj;
}

double max_state_deviation(const Trajectory& a, const Trajectory& b) {
  if (a.steps.size() != b.steps.size()) return std::numeric_limits<double>::infinity();
  double dev = 0.0;
  for (std::size_t i = 0; i < a.steps.size(); ++i)
    dev = std::max(dev, (a.steps[i].x - b.steps[i].x).lpNorm<Eigen::Infinity>());
  if (a.x_final.size() == b.x_final.size() && a.x_final.size() > 0)
    dev = std::max(dev, (a.x_final - b.x_final).lpNorm<Eigen::Infinity>());
  return dev;
}

std::vector<Vector> sample_feasible_states(const MpcProblem& problem, const CondensedQp& qp, int count,
                                           std::uint64_t seed) {
  if (count < 1) throw Error(Errc::invalid_argument, "sample count must be at least 1");
  constexpr long kMaxRejections = 1000000;
  std::mt19937_64 rng(seed);
  const Eigen::Index n = problem.n();
  std::vector<std::uniform_real_distribution<double>> dist;
  for (Eigen::Index i = 0; i < n; ++i) dist.emplace_back(problem.x_lo(i), problem.x_hi(i));
  std::vector<Vector> out;
  while (static_cast<int>(out.size()) < count) {
    long rejected = 0;
    for (;;) {
      Vector x(n);
      for (Eigen::Index i = 0; i < n; ++i) x(i) = dist[static_cast<std::size_t>(i)](rng);
      try {
        solve_qp(qp, x);
        out.push_back(std::move(x));
        break;
      } catch (const Error& e) {
        if (e.code() != Errc::infeasible && e.code() != Errc::degenerate_active_set) throw;
      }
      if (++rejected >= kMaxRejections)
        throw Error(Errc::invalid_argument,
                    "no feasible state after 10^6 draws; the feasible set is a tiny part of the box, try a smaller box");
    }
  }
  return out;
}

BatchReport run_batch(const MpcProblem& problem, const CondensedQp& qp, int count, std::uint64_t seed,
                      const std::vector<Variant>& variants, const SimConfig& base, unsigned threads) {
  BatchReport report;
  report.initial_states = sample_feasible_states(problem, qp, count, seed);
  const std::size_t runs = report.initial_states.size();
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());

  auto parallel = [&](auto&& job) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i; (i = next.fetch_add(1)) < runs;) job(i);
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  };

  std::vector<Trajectory> classical(runs);
  parallel([&](std::size_t i) {
    SimConfig c = base;
    c.x0 = report.initial_states[i];
    classical[i] = simulate_classical(problem, qp, c);
  });

  for (Variant v : variants) {
    std::vector<Trajectory> trajs(runs);
    parallel([&](std::size_t i) {
      SimConfig c = base;
      c.x0 = report.initial_states[i];
      c.variant = v;
      trajs[i] = simulate_event_triggered(problem, qp, c);
    });
    VariantAggregate agg;
    agg.variant = v;
    agg.runs = static_cast<int>(runs);
    for (std::size_t i = 0; i < runs; ++i) {
      const Trajectory& t = trajs[i];
      agg.steps += static_cast<std::int64_t>(t.steps.size());
      agg.events += t.events;
      agg.fallbacks += t.fallbacks;
      for (const auto& s : t.steps) {
        if (!s.event) continue;
        agg.total_bits += s.bits;
        agg.analytic_inv += s.analytic_inv;
        agg.analytic_mat += s.analytic_mat;
        agg.instrumented_inv += s.instrumented.inversion();
        agg.instrumented_mat += s.instrumented.matrix();
        if (s.q_a >= 0) ++agg.q_a_histogram[s.q_a];
      }
      if (t.aborted) agg.failures.push_back("run " + std::to_string(i) + ": " + *t.aborted);
      if (classical[i].aborted) agg.failures.push_back("run " + std::to_string(i) + " (classical): " + *classical[i].aborted);
      agg.max_deviation = std::max(agg.max_deviation, max_state_deviation(t, classical[i]));
    }
    report.variants.push_back(std::move(agg));
  }
  return report;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  if (traj.steps.empty()) {
    out << "k,e,q_A,bits,flops_inv,flops_mat\n";
    return;
  }
  const auto n = traj.steps.front().x.size(), m = traj.steps.front().u.size();
  out << "k";
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i;
  for (Eigen::Index i = 0; i < m; ++i) out << ",u" << i;
  out << ",e,q_A,bits,flops_inv,flops_mat\n";
  out.precision(17);
  for (const auto& s : traj.steps) {
    out << s.k;
    for (Eigen::Index i = 0; i < n; ++i) out << "," << s.x(i);
    for (Eigen::Index i = 0; i < m; ++i) out << "," << s.u(i);
    out << "," << (s.event ? 1 : 0) << "," << (s.q_a >= 0 ? std::to_string(s.q_a) : "") << "," << s.bits << ","
        << s.analytic_inv << "," << s.analytic_mat << "\n";
  }
}

void write_batch_csv(std::ostream& out, const BatchReport& report) {
  out << "variant,runs,steps,events,event_rate,bits,flops_inv,flops_mat,instrumented_inv,instrumented_mat,fallbacks,"
         "max_deviation\n";
  for (const auto& a : report.variants)
    out << variant_name(a.variant) << "," << a.runs << "," << a.steps << "," << a.events << "," << a.event_rate() << ","
        << a.total_bits << "," << a.analytic_inv << "," << a.analytic_mat << "," << a.instrumented_inv << ","
        << a.instrumented_mat << "," << a.fallbacks << "," << a.max_deviation << "\n";
}

void write_histogram_csv(std::ostream& out, const BatchReport& report) {
  out << "variant,q_A,count\n";
  for (const auto& a : report.variants)
    for (const auto& [qa, c] : a.q_a_histogram) out << variant_name(a.variant) << "," << qa << "," << c << "\n";
}

}  // namespace etmpc
