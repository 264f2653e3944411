#include "dphaser/bench.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "dphaser/phaser.hpp"
#include "dphaser/protocol.hpp"
#include "dphaser/topology.hpp"

namespace dphaser {
namespace {

constexpr uint64_t kStepLimit = 1u << 22;

SimWorld quiesced_team(int n, double p, uint64_t seed) {
  PhaserSpec spec;
  spec.modes.assign(n, Mode::SignalOnly);
  spec.phases = 0;
  spec.p = p;
  spec.seed = seed;
  SimWorld w = phaser_new(spec);
  w.record_trace = false;  // bootstrap traffic is not what's being measured
  w.run_to_quiescence(kStepLimit);
  return w;
}

Key gap_key(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> d(0, n - 1);
  return task_key(d(rng)) + (1u << 19);
}

}  // namespace

std::vector<BenchRow> bench_depth(const std::vector<int>& ns, int seeds, double p) {
  std::vector<BenchRow> rows;
  for (int n : ns) {
    double total = 0;
    uint64_t count = 0;
    for (int s = 0; s < seeds; ++s) {
      std::mt19937_64 rng(1000 + s);
      int max_h = max_height_for(n);
      std::vector<std::pair<Key, int>> members;
      for (int i = 0; i < n; ++i)
        members.push_back({task_key(i), sample_height(rng, p, max_h)});
      Topology t = build_oracle(members, max_h, n, 0);
      for (int i = 0; i < n; ++i) {
        total += t.depth_to_head(static_cast<NodeId>(i));
        ++count;
      }
    }
    rows.push_back({"depth", n, 0, p, seeds, "avg_depth", total / count,
                    4.0 * std::log2(static_cast<double>(n))});
  }
  return rows;
}

std::vector<BenchRow> bench_insert(const std::vector<int>& ns, int seeds, double p) {
  std::vector<BenchRow> rows;
  for (int n : ns) {
    double total = 0;
    for (int s = 0; s < seeds; ++s) {
      SimWorld w = quiesced_team(n, p, 1000 + s);
      std::mt19937_64 rng(77 + s);
      uint64_t before = w.delivered;
      async_spawn(w, 0, Mode::SignalOnly, gap_key(rng, n), 1, TaskPlan{0, {}});
      w.run_to_quiescence(kStepLimit);
      total += static_cast<double>(w.delivered - before);
    }
    rows.push_back({"insert", n, 0, p, seeds, "insert_msgs", total / seeds,
                    3.0 * std::log2(static_cast<double>(n)) + 6.0});
  }
  return rows;
}

std::vector<BenchRow> bench_delete(const std::vector<int>& ns, int seeds, double p) {
  std::vector<BenchRow> rows;
  for (int n : ns) {
    double total = 0, total_h = 0;
    for (int s = 0; s < seeds; ++s) {
      SimWorld w = quiesced_team(n, p, 1000 + s);
      NodeId victim = static_cast<NodeId>(n / 2);
      total_h += w.nodes.at(victim).scsl->target_height;
      uint64_t before = w.delivered;
      w.apply_local(begin_delete(w.nodes.at(victim), ListId::Scsl, w.cfg));
      w.run_to_quiescence(kStepLimit);
      total += static_cast<double>(w.delivered - before);
    }
    rows.push_back({"delete", n, 0, p, seeds, "delete_msgs", total / seeds,
                    2.0 * (total_h / seeds) + 2.0});
  }
  return rows;
}

std::vector<BenchRow> bench_promote(const std::vector<int>& cs, int seeds, double p) {
  std::vector<BenchRow> rows;
  for (int c : cs) {
    double total = 0;
    for (int s = 0; s < seeds; ++s) {
      SimWorld w = quiesced_team(c, p, 1000 + s);
      w.record_trace = true;  // promotion messages are counted off the trace
      std::mt19937_64 rng(77 + s);
      size_t before = w.trace.size();
      async_spawn(w, 0, Mode::SignalOnly, gap_key(rng, c), max_height_for(c), TaskPlan{0, {}});
      w.run_to_quiescence(kStepLimit);
      for (size_t i = before; i < w.trace.size(); ++i) {
        MsgKind k = w.trace[i].delivered.kind;
        if (k == MsgKind::PromoteSearch || k == MsgKind::PromoteLink ||
            k == MsgKind::PromoteAttached || k == MsgKind::PromoteAck ||
            k == MsgKind::PromoteHandoff)
          total += 1;
      }
    }
    rows.push_back({"promote", 0, c, p, seeds, "promote_msgs", total / seeds, 0});
  }
  return rows;
}

std::pair<double, double> fit_log2(const std::vector<std::pair<int, double>>& points) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [x, y] : points) {
    double lx = std::log2(static_cast<double>(x));
    sx += lx;
    sy += y;
    sxx += lx * lx;
    sxy += lx * y;
  }
  double m = points.size();
  double a = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  double b = (sy - a * sx) / m;
  return {a, b};
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "kind,n,c,p,seeds,metric,value,bound\n";
  for (const auto& r : rows) {
    out << r.kind << ',' << r.n << ',' << r.c << ',' << r.p << ',' << r.seeds << ',' << r.metric
        << ',' << r.value << ',' << r.bound << "\n";
  }
  return out.str();
}

}  // namespace dphaser
