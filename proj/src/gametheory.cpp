#include "magrpo/gametheory.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace magrpo::gametheory {

std::vector<PureCell> enumerate_pure_ne(const BimatrixGame& g) {
  std::vector<PureCell> out;
  for (int a1 = 0; a1 < 2; ++a1) {
    for (int a2 = 0; a2 < 2; ++a2) {
      PureCell c{a1, a2};
      bool p1_ok = g.u1[c.cell()] >= g.u1[PureCell{1 - a1, a2}.cell()];
      bool p2_ok = g.u2[c.cell()] >= g.u2[PureCell{a1, 1 - a2}.cell()];
      if (p1_ok && p2_ok) out.push_back(c);
    }
  }
  return out;
}

MixedResult mixed_ne_2x2(const BimatrixGame& g) {
  // Player 2 mixes q to make player 1 indifferent between rows, and
  // vice versa; each equation is linear with the same style of denominator.
  double d1 = g.u1[0] - g.u1[1] - g.u1[2] + g.u1[3];
  double d2 = g.u2[0] - g.u2[1] - g.u2[2] + g.u2[3];
  if (d1 == 0.0 || d2 == 0.0) return {std::nullopt, true};
  double q = (g.u1[3] - g.u1[1]) / d1;
  double p = (g.u2[3] - g.u2[2]) / d2;
  if (p <= 0.0 || p >= 1.0 || q <= 0.0 || q >= 1.0) return {std::nullopt, false};
  return {MixedProfile{p, q}, false};
}

std::array<double, 2> expected_utilities(const BimatrixGame& g,
                                         const MixedProfile& m) {
  std::array<double, 4> prob = {m.p * m.q, m.p * (1 - m.q), (1 - m.p) * m.q,
                                (1 - m.p) * (1 - m.q)};
  std::array<double, 2> u{};
  for (int cell = 0; cell < 4; ++cell) {
    u[0] += prob[cell] * g.u1[cell];
    u[1] += prob[cell] * g.u2[cell];
  }
  return u;
}

bool verify_ne(const BimatrixGame& g, const PureCell& c, double tol) {
  return g.u1[c.cell()] >= g.u1[PureCell{1 - c.a1, c.a2}.cell()] - tol &&
         g.u2[c.cell()] >= g.u2[PureCell{c.a1, 1 - c.a2}.cell()] - tol;
}

bool verify_ne(const BimatrixGame& g, const MixedProfile& m, double tol) {
  std::array<double, 2> at = expected_utilities(g, m);
  // Pure deviations: row a for player 1 against q, column a for player 2
  // against p.
  for (int a = 0; a < 2; ++a) {
    double dev1 = m.q * g.u1[a * 2] + (1 - m.q) * g.u1[a * 2 + 1];
    if (dev1 > at[0] + tol) return false;
    double dev2 = m.p * g.u2[a] + (1 - m.p) * g.u2[2 + a];
    if (dev2 > at[1] + tol) return false;
  }
  return true;
}

JointOptimum joint_optimum(const std::array<double, 4>& joint) {
  JointOptimum out;
  int best = 0;
  for (int cell = 1; cell < 4; ++cell) {
    if (joint[cell] > joint[best]) best = cell;
  }
  out.cell = PureCell{best / 2, best % 2};
  out.value = joint[best];
  for (int cell = 0; cell < 4; ++cell) {
    if (joint[cell] == joint[best]) out.ties.push_back(PureCell{cell / 2, cell % 2});
  }
  return out;
}

bool decomposition_check(const BimatrixGame& g, const std::array<double, 4>& joint) {
  for (int cell = 0; cell < 4; ++cell) {
    if (std::abs(g.u1[cell] + g.u2[cell] - joint[cell]) > 1e-12) return false;
  }
  return true;
}

SuboptimalityReport suboptimality_report(const BimatrixGame& g,
                                         const std::array<double, 4>& joint) {
  MAGRPO_REQUIRE(decomposition_check(g, joint),
                 "suboptimality_report: per-player tables do not sum to the "
                 "joint table");
  SuboptimalityReport r;
  r.joint = joint;
  r.optimum = joint_optimum(joint);
  r.pure_ne = enumerate_pure_ne(g);
  for (const PureCell& c : r.pure_ne) {
    double ju = joint[c.cell()];
    r.pure_ne_joint.push_back(ju);
    r.pure_ne_gap.push_back(r.optimum.value - ju);
  }
  r.mixed = mixed_ne_2x2(g);
  if (r.mixed.profile) {
    r.mixed_utilities = expected_utilities(g, *r.mixed.profile);
    r.mixed_joint = r.mixed_utilities[0] + r.mixed_utilities[1];
    r.mixed_gap = r.optimum.value - r.mixed_joint;
  }
  return r;
}

namespace {

std::string cell_name(const PureCell& c) {
  return std::string("(A") + char('1' + c.a1) + ",A" + char('1' + c.a2) + ")";
}

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(12) << v;
  return s.str();
}

}  // namespace

std::string format_report(const SuboptimalityReport& r) {
  std::ostringstream out;
  out << "joint utility matrix\n";
  out << "         A1       A2\n";
  for (int a1 = 0; a1 < 2; ++a1) {
    out << "  A" << a1 + 1;
    for (int a2 = 0; a2 < 2; ++a2) {
      out << "  " << std::setw(7) << num(r.joint[a1 * 2 + a2]);
    }
    out << "\n";
  }
  out << "joint optimum: " << cell_name(r.optimum.cell) << " value "
      << num(r.optimum.value);
  if (r.optimum.ties.size() > 1) {
    out << " (ties:";
    for (const PureCell& c : r.optimum.ties) out << " " << cell_name(c);
    out << ")";
  }
  out << "\n";
  if (r.pure_ne.empty()) {
    out << "pure equilibria: none\n";
  } else {
    out << "pure equilibria:\n";
    for (std::size_t i = 0; i < r.pure_ne.size(); ++i) {
      out << "  " << cell_name(r.pure_ne[i]) << "  joint "
          << num(r.pure_ne_joint[i]) << "  gap " << num(r.pure_ne_gap[i]) << "\n";
    }
  }
  if (r.mixed.degenerate) {
    out << "mixed equilibrium: degenerate (indifference condition vanishes)\n";
  } else if (!r.mixed.profile) {
    out << "mixed equilibrium: none interior\n";
  } else {
    out << "mixed equilibrium: p=" << num(r.mixed.profile->p)
        << " q=" << num(r.mixed.profile->q) << "  utilities ("
        << num(r.mixed_utilities[0]) << ", " << num(r.mixed_utilities[1])
        << ")  joint " << num(r.mixed_joint) << "  gap " << num(r.mixed_gap)
        << "\n";
  }
  return out.str();
}

}  // namespace magrpo::gametheory
