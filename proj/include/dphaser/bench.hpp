#pragma once

#include <string>
#include <vector>

namespace dphaser {

struct BenchRow {
  std::string kind;  // depth | insert | delete | promote
  int n = 0;         // team size (depth/insert/delete)
  int c = 0;         // team size for the promote sweep
  double p = 0.5;
  int seeds = 0;
  std::string metric;
  double value = 0;
  double bound = 0;  // 0 when the row is informational
};

// Average parent-chain hops to the head in oracle-built topologies.
std::vector<BenchRow> bench_depth(const std::vector<int>& ns, int seeds, double p);

// Messages to insert one height-1 member into a quiesced team of n.
std::vector<BenchRow> bench_insert(const std::vector<int>& ns, int seeds, double p);

// Messages to delete one member from a fresh quiesced team of n.
std::vector<BenchRow> bench_delete(const std::vector<int>& ns, int seeds, double p);

// Promotion messages when a full-height member joins a team of c.
std::vector<BenchRow> bench_promote(const std::vector<int>& cs, int seeds, double p);

// Least-squares fit value ~= a*log2(x) + b over (x, value) pairs.
std::pair<double, double> fit_log2(const std::vector<std::pair<int, double>>& points);

// Header: kind,n,c,p,seeds,metric,value,bound
std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace dphaser
