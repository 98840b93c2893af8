#pragma once

// Equilibrium analysis for 2x2 bimatrix games: pure equilibria by weak
// best-response enumeration, the interior mixed equilibrium by the
// indifference conditions, and the gap between equilibrium payoffs and the
// cooperative joint optimum.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "magrpo/core.hpp"

namespace magrpo::gametheory {

// Cells are row-major over (player-1 action, player-2 action); action 0 is
// A1, action 1 is A2.
struct BimatrixGame {
  std::array<double, 4> u1{};
  std::array<double, 4> u2{};

  double joint(int cell) const { return u1[cell] + u2[cell]; }
};

struct PureCell {
  int a1 = 0;
  int a2 = 0;

  int cell() const { return a1 * 2 + a2; }
  bool operator==(const PureCell&) const = default;
};

// P(A1) for each player.
struct MixedProfile {
  double p = 0.0;
  double q = 0.0;
};

// All cells where neither player gains by a unilateral deviation (weak
// inequalities, exact comparisons). Row-major order.
std::vector<PureCell> enumerate_pure_ne(const BimatrixGame& g);

struct MixedResult {
  std::optional<MixedProfile> profile;  // present only when strictly interior
  bool degenerate = false;              // an indifference equation vanished
};

// Interior mixed equilibrium of a 2x2 game from the opponent-indifference
// conditions; absent when a solution falls outside (0, 1).
MixedResult mixed_ne_2x2(const BimatrixGame& g);

// Deviation checks within `tol`.
bool verify_ne(const BimatrixGame& g, const PureCell& c, double tol = 1e-9);
bool verify_ne(const BimatrixGame& g, const MixedProfile& m, double tol = 1e-9);

// Expected utilities of a mixed profile, and of the game overall.
std::array<double, 2> expected_utilities(const BimatrixGame& g,
                                         const MixedProfile& m);

struct JointOptimum {
  PureCell cell;                // lowest row-major maximizer
  double value = 0.0;
  std::vector<PureCell> ties;   // every maximizing cell, row-major order
};

JointOptimum joint_optimum(const std::array<double, 4>& joint);

// True when u1 + u2 reproduces `joint` cell-by-cell within 1e-12.
bool decomposition_check(const BimatrixGame& g, const std::array<double, 4>& joint);

struct SuboptimalityReport {
  std::array<double, 4> joint{};
  JointOptimum optimum;
  std::vector<PureCell> pure_ne;
  std::vector<double> pure_ne_joint;  // joint utility of each pure equilibrium
  std::vector<double> pure_ne_gap;    // optimum minus that joint utility
  MixedResult mixed;
  std::array<double, 2> mixed_utilities{};  // per player, when mixed present
  double mixed_joint = 0.0;
  double mixed_gap = 0.0;
};

// Full picture of how far the game's equilibria fall short of the
// cooperative optimum. Contract error when the decomposition does not
// reproduce `joint`.
SuboptimalityReport suboptimality_report(const BimatrixGame& g,
                                         const std::array<double, 4>& joint);

std::string format_report(const SuboptimalityReport& r);

}  // namespace magrpo::gametheory
