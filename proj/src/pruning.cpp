#include "dbn/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "dbn/errors.hpp"
#include "dbn/parallel.hpp"

namespace dbn {

bool ConeFunction::eval(std::span<const bool> inputs) const {
  std::size_t m = 0;
  for (std::size_t k = 0; k < support.size(); ++k) m |= std::size_t(inputs[support[k]]) << k;
  return bit(m);
}

std::size_t PruneReport::total_before() const {
  return std::accumulate(gates_before.begin(), gates_before.end(), std::size_t{0});
}
std::size_t PruneReport::total_after() const {
  return std::accumulate(gates_after.begin(), gates_after.end(), std::size_t{0});
}

namespace {

// ---- cones -----------------------------------------------------------------

ConeFunction constant_cone(bool value) { return {{}, {Word(value)}}; }

ConeFunction variable_cone(std::uint32_t input) { return {{input}, {Word{0b10}}}; }

void set_bit(std::vector<Word>& t, std::size_t m) { t[m / kWordBits] |= Word{1} << (m % kWordBits); }

// Drop variables the table does not depend on.
void reduce(ConeFunction& f) {
  for (std::size_t k = f.support.size(); k-- > 0;) {
    const std::size_t n = std::size_t{1} << f.support.size();
    const std::size_t step = std::size_t{1} << k;
    bool depends = false;
    for (std::size_t m = 0; m < n && !depends; ++m)
      if (!(m & step) && f.bit(m) != f.bit(m | step)) depends = true;
    if (depends) continue;
    std::vector<Word> table(words_for(n / 2), 0);
    for (std::size_t m = 0; m < n / 2; ++m) {
      const std::size_t full = ((m >> k) << (k + 1)) | (m & (step - 1));
      if (f.bit(full)) set_bit(table, m);
    }
    f.table = std::move(table);
    f.support.erase(f.support.begin() + std::ptrdiff_t(k));
  }
}

ConeFunction combine(GateTruthTable table, const ConeFunction& a, const ConeFunction& b, std::size_t limit,
                     std::size_t layer, std::size_t gate) {
  const bool use_a = table.depends_on_a(), use_b = table.depends_on_b();
  if (!use_a && !use_b) return constant_cone(table.eval(false, false));
  std::vector<std::uint32_t> support;
  std::set_union(a.support.begin(), a.support.end(), b.support.begin(), b.support.end(), std::back_inserter(support));
  if (!use_a) support = b.support;
  if (!use_b) support = a.support;
  if (support.size() > limit) throw OversizedConeError(layer, gate, support.size());

  const auto positions = [&](const ConeFunction& f) {
    std::vector<std::size_t> pos;
    for (auto v : f.support) pos.push_back(std::size_t(std::lower_bound(support.begin(), support.end(), v) - support.begin()));
    return pos;
  };
  const auto pa = positions(a), pb = positions(b);
  const std::size_t n = std::size_t{1} << support.size();
  ConeFunction out{support, std::vector<Word>(words_for(n), 0)};
  for (std::size_t m = 0; m < n; ++m) {
    std::size_t ia = 0, ib = 0;
    if (use_a)
      for (std::size_t k = 0; k < pa.size(); ++k) ia |= ((m >> pa[k]) & 1U) << k;
    if (use_b)
      for (std::size_t k = 0; k < pb.size(); ++k) ib |= ((m >> pb[k]) & 1U) << k;
    if (table.eval(use_a && a.bit(ia), use_b && b.bit(ib))) set_bit(out.table, m);
  }
  reduce(out);
  return out;
}

std::uint64_t support_hash(const ConeFunction& f) {
  return std::accumulate(f.support.begin(), f.support.end(), std::uint64_t{0});
}

// ---- rewriting -------------------------------------------------------------

std::vector<std::size_t> layer_sizes(const HardCircuit& c) {
  std::vector<std::size_t> s;
  for (const auto& l : c.layers) s.push_back(l.size());
  return s;
}

// Point readers in layer l+1 at rep[old] for every signal of layer l.
void redirect_readers(HardCircuit& c, std::size_t layer, const std::vector<std::uint32_t>& rep) {
  if (layer + 1 >= c.layers.size()) return;
  for (auto& g : c.layers[layer + 1]) {
    if (g.table.depends_on_a()) g.in0 = rep[g.in0];
    if (g.table.depends_on_b()) g.in1 = rep[g.in1];
  }
}

HardGate constant_gate(bool value) {
  return {GateTruthTable(value ? GateTruthTable::kTrue : GateTruthTable::kFalse), 0, 0};
}

void check_profile(const HardCircuit& c, const ActivationProfile& p) {
  if (p.activations.size() != c.layers.size() || p.ones.size() != c.layers.size())
    throw StructuralError("activation profile does not match circuit depth");
  for (std::size_t l = 0; l < c.layers.size(); ++l)
    if (p.ones[l].size() != c.layers[l].size() || p.activations[l].signals() != c.layers[l].size())
      throw StructuralError("activation profile does not match layer " + std::to_string(l));
}

// Merge the rewrite-stage reroutes (pre-pass numbering) with the trivial cascade that follows.
PruneResult finish(const HardCircuit& original, HardCircuit rewritten, std::string pass,
                   std::vector<RerouteEntry> reroutes) {
  PruneResult trimmed = trivial_prune(rewritten);
  std::vector<std::vector<bool>> already(original.layers.size());
  for (std::size_t l = 0; l < original.layers.size(); ++l) already[l].assign(original.layers[l].size(), false);
  for (const auto& r : reroutes) already[r.layer][r.gate] = true;
  for (const auto& r : trimmed.report.reroutes)
    if (!already[r.layer][r.gate]) reroutes.push_back(r);
  std::sort(reroutes.begin(), reroutes.end(),
            [](const RerouteEntry& a, const RerouteEntry& b) { return std::tie(a.layer, a.gate) < std::tie(b.layer, b.gate); });
  trimmed.report.pass = std::move(pass);
  trimmed.report.gates_before = layer_sizes(original);
  trimmed.report.reroutes = std::move(reroutes);
  return trimmed;
}

}  // namespace

std::vector<std::vector<ConeFunction>> layer_cones(const HardCircuit& circuit, std::size_t up_to_layer,
                                                   std::size_t support_limit) {
  validate(circuit);
  if (up_to_layer >= circuit.layers.size()) throw StructuralError("layer_cones: layer out of range");
  std::vector<std::vector<ConeFunction>> cones(up_to_layer + 1);
  std::vector<ConeFunction> inputs;
  inputs.reserve(circuit.input_width);
  for (std::size_t i = 0; i < circuit.input_width; ++i) inputs.push_back(variable_cone(std::uint32_t(i)));
  for (std::size_t l = 0; l <= up_to_layer; ++l) {
    const auto& prev = l == 0 ? inputs : cones[l - 1];
    const auto& gates = circuit.layers[l];
    auto& out = cones[l];
    out.resize(gates.size());
    static const ConeFunction kUnused = constant_cone(false);
    for (std::size_t g = 0; g < gates.size(); ++g) {
      const HardGate& gate = gates[g];
      const ConeFunction& a = gate.table.depends_on_a() ? prev[gate.in0] : kUnused;
      const ConeFunction& b = gate.table.depends_on_b() ? prev[gate.in1] : kUnused;
      out[g] = combine(gate.table, a, b, support_limit, l, g);
    }
  }
  return cones;
}

ConeFunction cone_of(const HardCircuit& circuit, std::size_t layer, std::size_t gate, std::size_t support_limit) {
  if (layer >= circuit.layers.size() || gate >= circuit.layers[layer].size())
    throw StructuralError("cone_of: gate does not exist");
  return layer_cones(circuit, layer, support_limit)[layer][gate];
}

PruneResult trivial_prune(const HardCircuit& circuit) {
  validate(circuit);
  const std::size_t L = circuit.layers.size();
  std::vector<std::vector<bool>> used(L);
  for (std::size_t l = 0; l < L; ++l) used[l].assign(circuit.layers[l].size(), l + 1 == L);
  for (std::size_t l = L; l-- > 1;)
    for (std::size_t g = 0; g < circuit.layers[l].size(); ++g) {
      if (!used[l][g]) continue;
      const HardGate& gate = circuit.layers[l][g];
      if (gate.table.depends_on_a()) used[l - 1][gate.in0] = true;
      if (gate.table.depends_on_b()) used[l - 1][gate.in1] = true;
    }

  PruneResult res;
  res.report.pass = "trivial";
  res.report.gates_before = layer_sizes(circuit);
  HardCircuit& out = res.circuit;
  out.input_width = circuit.input_width;
  out.num_classes = circuit.num_classes;
  out.group_tau = circuit.group_tau;
  out.layers.resize(L);
  constexpr auto kGone = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> prev_map;
  for (std::size_t l = 0; l < L; ++l) {
    std::vector<std::uint32_t> map(circuit.layers[l].size(), kGone);
    for (std::size_t g = 0; g < circuit.layers[l].size(); ++g) {
      if (!used[l][g]) {
        res.report.reroutes.push_back({l, std::uint32_t(g), {}});
        continue;
      }
      HardGate gate = circuit.layers[l][g];
      if (l > 0) {
        const auto remap = [&](std::uint32_t idx) {
          return idx < prev_map.size() && prev_map[idx] != kGone ? prev_map[idx] : 0U;
        };
        gate.in0 = remap(gate.in0);
        gate.in1 = remap(gate.in1);
      }
      map[g] = std::uint32_t(out.layers[l].size());
      out.layers[l].push_back(gate);
    }
    prev_map = std::move(map);
  }
  res.report.gates_after = layer_sizes(out);
  return res;
}

PruneResult logic_equivalence_prune(const HardCircuit& circuit, std::size_t support_limit) {
  validate(circuit);
  const std::size_t L = circuit.layers.size();
  if (L < 2) return finish(circuit, circuit, "logic-equiv", {});
  // All cones first so an oversized cone aborts before any rewrite.
  const auto cones = layer_cones(circuit, L - 2, support_limit);

  HardCircuit work = circuit;
  std::vector<RerouteEntry> reroutes;
  for (std::size_t l = 0; l + 1 < L; ++l) {
    const auto& lc = cones[l];
    std::vector<std::uint32_t> rep(lc.size());
    std::iota(rep.begin(), rep.end(), 0U);
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets;
    for (std::uint32_t g = 0; g < lc.size(); ++g) buckets[support_hash(lc[g])].push_back(g);
    for (const auto& [hash, members] : buckets) {
      // Members are in ascending gate order; the first of each exact class survives.
      std::vector<std::uint32_t> survivors;
      for (std::uint32_t g : members) {
        auto it = std::find_if(survivors.begin(), survivors.end(), [&](std::uint32_t s) { return lc[s] == lc[g]; });
        if (it == survivors.end()) survivors.push_back(g);
        else rep[g] = *it;
      }
    }
    for (std::uint32_t g = 0; g < lc.size(); ++g) {
      const bool constant = lc[g].is_constant();
      if (constant && rep[g] == g) work.layers[l][g] = constant_gate(lc[g].bit(0));
      if (rep[g] == g) continue;
      RerouteTarget t{RerouteTarget::Kind::kGate, rep[g]};
      if (constant) t.kind = lc[g].bit(0) ? RerouteTarget::Kind::kConst1 : RerouteTarget::Kind::kConst0;
      reroutes.push_back({l, g, t});
    }
    redirect_readers(work, l, rep);
  }
  return finish(circuit, std::move(work), "logic-equiv", std::move(reroutes));
}

ActivationProfile profile_activations(const HardCircuit& circuit, const BitMatrix& data) {
  ActivationProfile p;
  p.sample_count = data.samples();
  p.activations = eval_circuit_layers(circuit, data);
  for (const auto& acts : p.activations) {
    std::vector<std::size_t> ones(acts.signals());
    for (std::size_t g = 0; g < acts.signals(); ++g) ones[g] = acts.count_ones(g);
    p.ones.push_back(std::move(ones));
  }
  return p;
}

PruneResult greedy_prune(const HardCircuit& circuit, const ActivationProfile& profile, double threshold) {
  if (!(threshold > 0.5 && threshold <= 1.0)) throw ConfigError("greedy threshold must lie in (0.5, 1]");
  validate(circuit);
  check_profile(circuit, profile);
  if (profile.sample_count == 0) throw StructuralError("greedy_prune: empty activation profile");
  const double n = double(profile.sample_count);
  HardCircuit work = circuit;
  std::vector<RerouteEntry> reroutes;
  const std::size_t L = circuit.layers.size();
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t G = circuit.layers[l].size();
    std::vector<std::uint32_t> rep(G);
    std::iota(rep.begin(), rep.end(), 0U);
    std::array<std::optional<std::uint32_t>, 2> pool;
    for (std::uint32_t g = 0; g < G; ++g) {
      const double ones = double(profile.ones[l][g]) / n;
      const double zeros = double(profile.sample_count - profile.ones[l][g]) / n;
      std::optional<bool> value;
      if (ones >= threshold) value = true;
      else if (zeros >= threshold) value = false;
      if (!value) continue;
      work.layers[l][g] = constant_gate(*value);
      if (l + 1 == L) continue;  // output gates stay in place
      auto& slot = pool[std::size_t(*value)];
      if (!slot) {
        slot = g;
        continue;
      }
      rep[g] = *slot;
      reroutes.push_back({l, g, {*value ? RerouteTarget::Kind::kConst1 : RerouteTarget::Kind::kConst0, *slot}});
    }
    redirect_readers(work, l, rep);
  }
  return finish(circuit, std::move(work), "greedy", std::move(reroutes));
}

double phi_from_counts(std::size_t n, std::size_t n_i, std::size_t n_j, std::size_t n_ij) {
  if (n_i == 0 || n_i == n || n_j == 0 || n_j == n) return std::numeric_limits<double>::quiet_NaN();
  if (n_i == n_j && n_ij == n_i) return 1.0;
  const double num = double(n) * double(n_ij) - double(n_i) * double(n_j);
  const double den = std::sqrt(double(n_i) * double(n - n_i)) * std::sqrt(double(n_j) * double(n - n_j));
  return num / den;
}

double activation_correlation(const BitMatrix& acts, std::size_t i, std::size_t j) {
  const auto a = acts.column(i), b = acts.column(j);
  std::size_t ni = 0, nj = 0, nij = 0;
  for (std::size_t w = 0; w < a.size(); ++w) {
    ni += std::size_t(std::popcount(a[w]));
    nj += std::size_t(std::popcount(b[w]));
    nij += std::size_t(std::popcount(a[w] & b[w]));
  }
  return phi_from_counts(acts.samples(), ni, nj, nij);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_rank(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) throw StructuralError("spearman_rank: vectors must be equal-length and non-empty");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = double(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

PruneResult similarity_prune(const HardCircuit& circuit, const ActivationProfile& profile, double c) {
  if (!(c > 0.0 && c <= 1.0)) throw ConfigError("similarity threshold must lie in (0, 1]");
  validate(circuit);
  check_profile(circuit, profile);
  HardCircuit work = circuit;
  std::vector<RerouteEntry> reroutes;
  const std::size_t n = profile.sample_count;
  for (std::size_t l = 0; l + 1 < circuit.layers.size(); ++l) {
    const auto& acts = profile.activations[l];
    std::vector<std::uint32_t> live;
    for (std::uint32_t g = 0; g < circuit.layers[l].size(); ++g)
      if (profile.ones[l][g] > 0 && profile.ones[l][g] < n) live.push_back(g);

    struct Pair {
      double rho;
      std::uint32_t i, j;
    };
    // Per-row candidate lists keep the parallel pass free of shared writes.
    std::vector<std::vector<Pair>> rows(live.size());
    parallel_for(live.size(), [&](std::size_t begin, std::size_t end) {
      for (std::size_t a = begin; a < end; ++a) {
        const auto ca = acts.column(live[a]);
        for (std::size_t b = a + 1; b < live.size(); ++b) {
          const auto cb = acts.column(live[b]);
          std::size_t nij = 0;
          for (std::size_t w = 0; w < ca.size(); ++w) nij += std::size_t(std::popcount(ca[w] & cb[w]));
          const double rho = phi_from_counts(n, profile.ones[l][live[a]], profile.ones[l][live[b]], nij);
          if (rho >= c) rows[a].push_back({rho, live[a], live[b]});
        }
      }
    });
    std::vector<Pair> pairs;
    for (auto& r : rows) pairs.insert(pairs.end(), r.begin(), r.end());
    std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
      if (x.rho != y.rho) return x.rho > y.rho;
      return std::tie(x.i, x.j) < std::tie(y.i, y.j);
    });

    enum class Role : std::uint8_t { kFree, kSurvivor, kRemoved };
    std::vector<Role> role(circuit.layers[l].size(), Role::kFree);
    std::vector<std::uint32_t> rep(circuit.layers[l].size());
    std::iota(rep.begin(), rep.end(), 0U);
    for (const auto& p : pairs) {
      if (role[p.j] != Role::kFree || role[p.i] == Role::kRemoved) continue;
      role[p.i] = Role::kSurvivor;
      role[p.j] = Role::kRemoved;
      rep[p.j] = p.i;
      reroutes.push_back({l, p.j, {RerouteTarget::Kind::kGate, p.i}});
    }
    redirect_readers(work, l, rep);
  }
  return finish(circuit, std::move(work), "similarity", std::move(reroutes));
}

void write_prune_report_csv(std::ostream& out, std::span<const PruneReport> reports, bool header) {
  if (header) out << "pass,layer,before,after,accuracy\n";
  for (const auto& r : reports) {
    const std::string acc = r.accuracy_after ? std::to_string(*r.accuracy_after) : "";
    for (std::size_t l = 0; l < r.gates_before.size(); ++l)
      out << r.pass << ',' << l << ',' << r.gates_before[l] << ',' << r.gates_after[l] << ',' << acc << '\n';
    out << r.pass << ",total," << r.total_before() << ',' << r.total_after() << ',' << acc << '\n';
  }
}

}  // namespace dbn
