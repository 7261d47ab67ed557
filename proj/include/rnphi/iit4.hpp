#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "repertoire.hpp"

namespace rnphi::iit4 {

using iit::Dist;
using iit::Mask;
using iit::Network;
using iit::Repertoires;
using iit::Severed;

enum class Direction { cause, effect };

inline constexpr double kPhiThreshold = 1e-10;
inline constexpr double kTieTolerance = 1e-10;

/// max_s p(s) log2(p(s)/q(s)). Infinite when q(s) = 0 < p(s).
inline double intrinsic_difference(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("intrinsic difference: mismatched supports");
  double best = 0.0;
  bool first = true;
  for (std::size_t s = 0; s < p.size(); ++s) {
    double v = 0.0;
    if (p[s] > 0.0) v = q[s] > 0.0 ? p[s] * std::log2(p[s] / q[s]) : std::numeric_limits<double>::infinity();
    if (first || v > best) best = v;
    first = false;
  }
  return best;
}

/// One side of a distinction: purview, the purview state it specifies (as
/// full-system bits) and its integrated information.
struct Face {
  Mask purview = 0;
  unsigned state = 0;
  double phi = 0.0;
  Dist repertoire;
};

struct Distinction {
  Mask mechanism = 0;
  unsigned state = 0;
  Face cause, effect;
  double phi = 0.0;

  const Face& face(Direction d) const { return d == Direction::cause ? cause : effect; }
  /// Units across both purviews, cause and effect counted separately.
  int purview_units() const { return iit::popcount(cause.purview) + iit::popcount(effect.purview); }
};

struct FaceRef {
  int distinction;
  Direction direction;
};

struct Relation {
  std::vector<FaceRef> faces;
  std::vector<Mask> mechanisms;
  Mask overlap = 0;
  double phi = 0.0;
};

struct Phi4Result {
  double phi = 0.0;
  std::vector<double> structure;  // indexed by mechanism mask
  unsigned state = 0;
  double distinction_sum = 0.0;
  double relation_sum = 0.0;
  std::vector<Distinction> distinctions;
};

namespace detail {

/// Set partitions of `set` as lists of blocks, via restricted growth strings.
inline std::vector<std::vector<Mask>> set_partitions(Mask set) {
  std::vector<int> nodes;
  for (Mask m = set; m; m &= m - 1) nodes.push_back(std::countr_zero(m));
  const int n = static_cast<int>(nodes.size());
  std::vector<std::vector<Mask>> out;
  if (n == 0) return out;
  std::vector<int> a(n, 0), mx(n, 0);
  for (;;) {
    int k = 0;
    for (int v : a) k = std::max(k, v + 1);
    std::vector<Mask> blocks(k, 0);
    for (int i = 0; i < n; ++i) blocks[a[i]] |= 1u << nodes[i];
    out.push_back(std::move(blocks));
    int i = n - 1;
    while (i > 0 && a[i] == mx[i - 1] + 1) --i;
    if (i == 0) break;
    ++a[i];
    mx[i] = std::max(mx[i - 1], a[i]);
    for (int j = i + 1; j < n; ++j) {
      a[j] = 0;
      mx[j] = mx[i];
    }
  }
  return out;
}

/// A mechanism/purview partition: part k pairs mech[k] with purv[k]; the
/// final entry of purv belongs to the empty mechanism.
struct Partition {
  std::vector<Mask> mech;
  std::vector<Mask> purv;
  int cut = 0;
};

/// Partitions that split the mechanism into k parts and the purview into
/// k + 1 (possibly empty) parts, the last one unconnected. A single-part
/// mechanism is only disconnected from the whole purview.
inline std::vector<Partition> partitions(Mask mechanism, Mask purview) {
  std::vector<Partition> out;
  std::vector<int> pnodes;
  for (Mask m = purview; m; m &= m - 1) pnodes.push_back(std::countr_zero(m));
  const int np = static_cast<int>(pnodes.size());
  const int nm = iit::popcount(mechanism);
  for (auto& blocks : set_partitions(mechanism)) {
    const int k = static_cast<int>(blocks.size());
    if (k == 1) {
      out.push_back({blocks, {0u, purview}, nm * np});
      continue;
    }
    int total = 1;
    for (int i = 0; i < np; ++i) total *= k + 1;
    for (int code = 0; code < total; ++code) {
      Partition p;
      p.mech = blocks;
      p.purv.assign(k + 1, 0u);
      int c = code;
      for (int i = 0; i < np; ++i) {
        p.purv[c % (k + 1)] |= 1u << pnodes[i];
        c /= k + 1;
      }
      for (int j = 0; j < k; ++j) p.cut += iit::popcount(p.mech[j]) * (np - iit::popcount(p.purv[j]));
      out.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace detail

class Analyzer {
 public:
  Analyzer(const Network& net, unsigned state) : net_(net), state_(state), reps_(net, Severed::none()) {
    if (state >= static_cast<unsigned>(net.states())) throw ValidationError("state out of range");
    if (!net.reachable(state)) throw StateUnreachableError("state " + std::to_string(state) + " cannot be reached");
    const int ns = net.states();
    cause_.resize(static_cast<std::size_t>(ns) * ns);
    effect_.resize(static_cast<std::size_t>(ns) * ns);
    for (int m = 0; m < ns; ++m)
      for (int z = 0; z < ns; ++z) {
        cause_[m * ns + z] = reps_.cause(m, z, state);
        effect_[m * ns + z] = reps_.effect(m, z, state);
      }
  }

  unsigned state() const { return state_; }

  const Dist& repertoire(Direction d, Mask mechanism, Mask purview) const {
    const std::size_t i = static_cast<std::size_t>(mechanism) * net_.states() + purview;
    return d == Direction::cause ? cause_[i] : effect_[i];
  }

  /// Integrated information of `mechanism` over `purview`: the specified
  /// purview state and the phi of its minimum (normalized) partition. Ties
  /// in the normalized value go to the smaller phi.
  Face integrated(Direction d, Mask mechanism, Mask purview) const {
    Face f;
    f.purview = purview;
    f.repertoire = repertoire(d, mechanism, purview);
    const Dist& whole = f.repertoire;
    const Dist& uc = repertoire(d, 0, purview);
    if (whole.all_zero()) return f;
    int zbest = -1;
    double ii = 0.0;
    for (int z = 0; z < whole.size; ++z) {
      if (whole.p[z] <= 0.0) continue;
      const double v = uc.p[z] > 0.0 ? whole.p[z] * std::log2(whole.p[z] / uc.p[z])
                                      : std::numeric_limits<double>::infinity();
      if (zbest < 0 || v > ii + 1e-12) {
        ii = v;
        zbest = z;
      }
    }
    f.state = iit::expand(static_cast<unsigned>(zbest), purview);
    if (!(ii > 0.0)) return f;
    const double pw = whole.p[zbest];
    double best_ratio = std::numeric_limits<double>::infinity();
    double best_phi = 0.0;
    for (const auto& part : detail::partitions(mechanism, purview)) {
      double pp = 1.0;
      for (std::size_t k = 0; k < part.purv.size(); ++k) {
        const Mask zk = part.purv[k];
        if (zk == 0) continue;
        const Mask mk = k < part.mech.size() ? part.mech[k] : 0u;
        pp *= repertoire(d, mk, zk).p[iit::compress(f.state, zk)];
      }
      double phi;
      if (pp <= 0.0) {
        phi = std::numeric_limits<double>::infinity();
      } else {
        phi = std::max(0.0, pw * std::log2(pw / pp));
      }
      const double ratio = phi / part.cut;
      const double tol = kTieTolerance * (1.0 + std::abs(ratio));
      if (std::isinf(best_ratio) || ratio < best_ratio - tol ||
          (std::abs(ratio - best_ratio) <= tol && phi < best_phi)) {
        best_ratio = ratio;
        best_phi = phi;
        if (phi == 0.0) break;
      }
    }
    f.phi = std::isfinite(best_phi) ? best_phi : 0.0;
    return f;
  }

  /// Maximally irreducible face over purviews; ties prefer larger purviews,
  /// then the first in size-major order.
  Face best_face(Direction d, Mask mechanism) const {
    Face best;
    bool have = false;
    for (Mask z : purviews_) {
      Face f = integrated(d, mechanism, z);
      if (!have || f.phi > best.phi + kTieTolerance ||
          (std::abs(f.phi - best.phi) <= kTieTolerance && iit::popcount(z) > iit::popcount(best.purview))) {
        best = std::move(f);
        have = true;
      }
    }
    return best;
  }

  std::optional<Distinction> distinction(Mask mechanism) const {
    if (mechanism == 0 || mechanism > net_.all()) throw ValidationError("mechanism must be a nonempty node set");
    Distinction d;
    d.mechanism = mechanism;
    d.state = state_;
    d.cause = best_face(Direction::cause, mechanism);
    d.effect = best_face(Direction::effect, mechanism);
    d.phi = std::min(d.cause.phi, d.effect.phi);
    if (!(d.phi > kPhiThreshold)) return std::nullopt;
    return d;
  }

  std::vector<Distinction> distinctions() const {
    std::vector<Distinction> out;
    for (Mask m = 1; m <= net_.all(); ++m)
      if (auto d = distinction(m)) out.push_back(std::move(*d));
    return out;
  }

  Phi4Result phi_structure() const;

 private:
  Network net_;
  unsigned state_;
  Repertoires reps_;
  std::vector<Dist> cause_, effect_;
  std::vector<Mask> purviews_ = [this] {
    std::vector<Mask> v;
    for (int r = 1; r <= net_.n; ++r)
      for (Mask m = 1; m <= net_.all(); ++m)
        if (iit::popcount(m) == r) v.push_back(m);
    return v;
  }();
};

/// Relation weight of a distinction: its phi per purview unit.
inline double relation_weight(const Distinction& d) { return d.phi / d.purview_units(); }

/// Units of the faces' common purview on which they all specify the same state.
inline Mask congruent_overlap(const std::vector<Distinction>& ds, const std::vector<FaceRef>& faces) {
  Mask on = ~0u, off = ~0u;
  for (const auto& f : faces) {
    const Face& x = ds[f.distinction].face(f.direction);
    on &= x.purview & x.state;
    off &= x.purview & ~x.state;
  }
  return on | off;
}

/// Every relation among the faces of `ds`: sets of two or more faces with a
/// nonempty congruent overlap. Throws once more than `limit` are found.
inline std::vector<Relation> relations(const std::vector<Distinction>& ds, std::size_t limit = 1u << 20) {
  std::vector<FaceRef> faces;
  for (int i = 0; i < static_cast<int>(ds.size()); ++i) {
    faces.push_back({i, Direction::cause});
    faces.push_back({i, Direction::effect});
  }
  std::vector<Relation> out;
  std::vector<FaceRef> cur;
  auto rec = [&](auto& self, std::size_t next, Mask on, Mask off) -> void {
    for (std::size_t i = next; i < faces.size(); ++i) {
      const Face& x = ds[faces[i].distinction].face(faces[i].direction);
      const Mask non = on & x.purview & x.state;
      const Mask noff = off & x.purview & ~x.state;
      if ((non | noff) == 0) continue;
      cur.push_back(faces[i]);
      if (cur.size() >= 2) {
        Relation r;
        r.faces = cur;
        r.overlap = non | noff;
        double w = std::numeric_limits<double>::infinity();
        for (const auto& f : cur) {
          const Mask m = ds[f.distinction].mechanism;
          if (std::find(r.mechanisms.begin(), r.mechanisms.end(), m) == r.mechanisms.end()) r.mechanisms.push_back(m);
          w = std::min(w, relation_weight(ds[f.distinction]));
        }
        r.phi = iit::popcount(r.overlap) * w;
        out.push_back(std::move(r));
        if (out.size() > limit) throw Error("relation enumeration exceeded its limit");
      }
      self(self, i + 1, non, noff);
      cur.pop_back();
    }
  };
  rec(rec, 0, ~0u, ~0u);
  return out;
}

/// Sum of relation phi and its equal-split attribution to mechanisms,
/// without enumerating relations. A relation with congruent overlap O
/// contributes its minimum weight once per unit of O, so the total splits
/// over (unit, state) pairs; within one pair every nonempty choice of faces
/// from the distinctions that specify it forms a relation unless it is a
/// single face.
inline double relation_sum(const std::vector<Distinction>& ds, std::vector<double>* attribution) {
  const int nd = static_cast<int>(ds.size());
  if (attribution) attribution->assign(nd, 0.0);
  double total = 0.0;
  std::vector<int> order(nd);
  for (int i = 0; i < nd; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return relation_weight(ds[a]) < relation_weight(ds[b]); });
  for (int u = 0; u < iit::kMaxNodes; ++u) {
    for (unsigned v = 0; v < 2; ++v) {
      // Distinctions (in weight order) with the number of faces specifying u = v.
      std::vector<int> who, faces;
      for (int i : order) {
        int k = 0;
        for (Direction dir : {Direction::cause, Direction::effect}) {
          const Face& f = ds[i].face(dir);
          if ((f.purview >> u & 1u) && (f.state >> u & 1u) == v) ++k;
        }
        if (k) {
          who.push_back(i);
          faces.push_back(k);
        }
      }
      const int n = static_cast<int>(who.size());
      std::vector<double> c(n);
      for (int i = 0; i < n; ++i) c[i] = faces[i] == 2 ? 3.0 : 1.0;
      // poly(skip) = coefficients of prod over l > i, l != skip of (1 + c_l x).
      auto poly = [&](int i, int skip) {
        std::vector<double> a{1.0};
        for (int l = i + 1; l < n; ++l) {
          if (l == skip) continue;
          a.push_back(0.0);
          for (std::size_t t = a.size() - 1; t > 0; --t) a[t] += c[l] * a[t - 1];
        }
        return a;
      };
      for (int i = 0; i < n; ++i) {
        const double w = relation_weight(ds[who[i]]);
        const auto a = poly(i, -1);
        double count = 0.0, own = 0.0;
        for (std::size_t t = 0; t < a.size(); ++t) {
          count += a[t];
          own += a[t] / static_cast<double>(t + 1);
        }
        total += w * (c[i] * count - faces[i]);
        if (!attribution) continue;
        (*attribution)[who[i]] += w * (c[i] * own - faces[i]);
        for (int j = i + 1; j < n; ++j) {
          const auto b = poly(i, j);
          double share = 0.0;
          for (std::size_t t = 0; t < b.size(); ++t) share += b[t] / static_cast<double>(t + 2);
          (*attribution)[who[j]] += w * c[i] * c[j] * share;
        }
      }
    }
  }
  return total;
}

inline Phi4Result Analyzer::phi_structure() const {
  Phi4Result r;
  r.state = state_;
  r.structure.assign(static_cast<std::size_t>(net_.states()), 0.0);
  r.distinctions = distinctions();
  std::vector<double> attr;
  r.relation_sum = relation_sum(r.distinctions, &attr);
  for (std::size_t i = 0; i < r.distinctions.size(); ++i) {
    const auto& d = r.distinctions[i];
    r.distinction_sum += d.phi;
    r.structure[d.mechanism] += d.phi + attr[i];
  }
  r.phi = 0.0;
  for (double v : r.structure) r.phi += v;
  return r;
}

/// Phi and structure vector of the full system in one state.
inline Phi4Result phi_structure_full_subsystem(const Network& net, unsigned state) {
  return Analyzer(net, state).phi_structure();
}

}  // namespace rnphi::iit4
