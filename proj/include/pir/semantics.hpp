#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pir/ast.hpp"

namespace pir {

// Canonical forms are a Scope prefix over a flat parallel composition.
// Decomposing them gives the reduction machinery a worklist: scopes
// outermost first, threads in canonical order.
struct ThreadView {
  std::vector<std::pair<std::string, ChannelState>> scopes;
  std::vector<ProcPtr> threads;
};

ThreadView decompose(const ProcPtr& canonical);
ProcPtr recompose(const ThreadView& view);

struct StepLabel {
  std::string rule;    // rCom | rRec | rThen | rElse | rAll | rFree
  std::string locus;   // thread index in the canonical form, "t1*t4" for rCom
  std::string subject; // channel (rCom/rFree), rec binder (rRec), match pair
  std::string fresh;   // rAll only: the channel chosen for the new scope

  friend bool operator==(const StepLabel&, const StepLabel&) = default;
};

std::string label_text(const StepLabel& l);

struct ErrorWitness {
  std::string rule;  // eAty | eOut | eIn
  std::string channel;
  int out_arity = -1;  // eAty only
  int in_arity = -1;   // eAty only
  std::string locus;

  friend bool operator==(const ErrorWitness&, const ErrorWitness&) = default;
};

std::string witness_text(const ErrorWitness& w);

struct Successor {
  StepLabel label;
  Configuration after;  // canonicalized
};

// All one-step reducts of the configuration up to structural congruence,
// in a deterministic order. Throws std::invalid_argument on open input.
std::vector<Successor> successors(const Configuration& c);

// All error redexes: mismatched-arity communication pairs and prefixes on
// deallocated channels, whether the state lives in the store or in an
// enclosing scope.
std::vector<ErrorWitness> error_witnesses(const Configuration& c);

// Re-applies a recorded label sequence, matching labels against the
// successor sets along the way. Returns false if any step fails to match;
// `out` then holds the configuration reached so far.
bool replay(const Configuration& c, const std::vector<StepLabel>& steps,
            Configuration* out = nullptr);

struct RunStep {
  StepLabel label;
  Configuration after;
};

struct RunResult {
  std::vector<RunStep> trace;
  Configuration final_config;
  // terminated: nothing left to do; stuck: threads remain but none can move;
  // error: halted on a state with an error witness; truncated: step budget.
  std::string halt;
  std::vector<ErrorWitness> witnesses;  // at the halting state
};

// Random scheduler: picks uniformly among successors with a seeded
// generator. Identical seed and input give an identical trace.
RunResult run(const Configuration& c, std::uint64_t seed, int max_steps);

struct ExploreBounds {
  int max_depth = 20;
  int max_unfold = 2;
  std::size_t max_states = 100000;
};

struct ErrorTrace {
  std::vector<StepLabel> steps;
  ErrorWitness witness;
};

struct ExploreReport {
  std::size_t states = 0;  // distinct canonical configurations reached
  std::size_t stuck = 0;   // states with no successor and no witness
  bool truncated = false;  // some bound cut the frontier
  std::vector<ErrorTrace> errors;  // one shortest trace per erroneous state
  ExploreBounds bounds;
};

// Breadth-first search over canonical configurations. Recursion unfoldings
// are counted per rec binder and capped; hitting any bound sets truncated.
ExploreReport explore(const Configuration& c, const ExploreBounds& bounds);

}  // namespace pir
