#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace pir {

// Channel names and placeholder variables share one lexical space in the
// surface syntax; binding context decides which is which. A Var only ever
// stands for a Name, never the other way around.
enum class IdKind { Name, Var };

struct Ident {
  IdKind kind;
  std::string text;

  friend bool operator==(const Ident&, const Ident&) = default;
  friend auto operator<=>(const Ident&, const Ident&) = default;
};

inline Ident name(std::string text) { return {IdKind::Name, std::move(text)}; }
inline Ident var(std::string text) { return {IdKind::Var, std::move(text)}; }

enum class ChannelState { Allocated, Deallocated };

struct Process;
using ProcPtr = std::shared_ptr<const Process>;

struct OutputP {
  Ident subject;
  std::vector<Ident> objects;
  ProcPtr cont;
};

struct InputP {
  Ident subject;
  std::vector<std::string> params;  // bound Vars, pairwise distinct
  ProcPtr cont;
};

struct NilP {};

struct MatchP {
  Ident left;
  Ident right;
  ProcPtr then_branch;
  ProcPtr else_branch;
};

struct RecP {
  std::string binder;  // process variable
  ProcPtr body;
};

struct PVarP {
  std::string label;
};

struct ParP {
  ProcPtr left;
  ProcPtr right;
};

// new c:s.P -- binds the Name c with an explicit channel state baked into
// the binder, so deallocation under a restriction has somewhere to live.
struct ScopeP {
  std::string name;
  ChannelState state;
  ProcPtr body;
};

struct AllocP {
  std::string binder;  // bound Var
  ProcPtr body;
};

struct FreeP {
  Ident subject;
  ProcPtr cont;
};

struct Process {
  std::variant<OutputP, InputP, NilP, MatchP, RecP, PVarP, ParP, ScopeP,
               AllocP, FreeP>
      node;
};

template <class T>
bool holds(const ProcPtr& p) {
  return std::holds_alternative<T>(p->node);
}

template <class T>
const T& get(const ProcPtr& p) {
  return std::get<T>(p->node);
}

ProcPtr make_output(Ident subject, std::vector<Ident> objects, ProcPtr cont);
ProcPtr make_input(Ident subject, std::vector<std::string> params,
                   ProcPtr cont);
ProcPtr make_nil();
ProcPtr make_match(Ident left, Ident right, ProcPtr then_branch,
                   ProcPtr else_branch);
ProcPtr make_rec(std::string binder, ProcPtr body);
ProcPtr make_pvar(std::string label);
ProcPtr make_par(ProcPtr left, ProcPtr right);
ProcPtr make_scope(std::string name, ChannelState state, ProcPtr body);
ProcPtr make_alloc(std::string binder, ProcPtr body);
ProcPtr make_free(Ident subject, ProcPtr cont);

// Free occurrence sets, split by namespace.
std::set<std::string> free_names(const ProcPtr& p);
std::set<std::string> free_vars(const ProcPtr& p);
std::set<std::string> free_procvars(const ProcPtr& p);

// Every name token in the term, bound or free. Used when picking names that
// must not clash with anything already present.
std::set<std::string> all_names(const ProcPtr& p);

// Smallest-suffix fresh name: base0, base1, ... skipping `avoid`. The base
// has any trailing digits stripped first so renaming d1 yields d2, not d10.
std::string fresh_name(const std::string& base,
                       const std::set<std::string>& avoid);

// Simultaneous capture-avoiding substitution of Names for free Vars.
// Throws std::invalid_argument if the same Var appears twice in `subs`.
ProcPtr subst_names(const ProcPtr& p,
                    const std::vector<std::pair<std::string, std::string>>& subs);

// Capture-avoiding renaming of one free Name.
ProcPtr rename_free_name(const ProcPtr& p, const std::string& from,
                         const std::string& to);

// Capture-avoiding substitution of a process for a free process variable.
ProcPtr subst_procvar(const ProcPtr& p, const std::string& label,
                      const ProcPtr& body);

bool alpha_eq(const ProcPtr& p, const ProcPtr& q);

// Rendering that is invariant under renaming of bound identifiers: binders
// print as de Bruijn levels, free identifiers by name. alpha_eq(p, q) iff
// alpha_key(p) == alpha_key(q).
std::string alpha_key(const ProcPtr& p);

// Normal form with respect to structural congruence: parallel compositions
// are flattened into a deterministically sorted multiset, nil units vanish,
// and restrictions are extruded into one prefix of Scope binders with
// deterministically chosen names. Idempotent up to alpha equivalence. The
// garbage axiom (dropping a restriction on an unused name) is not applied.
ProcPtr canonical_form(const ProcPtr& p);

struct Configuration {
  std::map<std::string, ChannelState> store;
  ProcPtr process;
};

// Throws std::invalid_argument unless fn(process) is covered by the store.
Configuration make_configuration(std::map<std::string, ChannelState> store,
                                 ProcPtr process);

// No free Vars and no free process variables.
bool closed(const Configuration& c);

// Store plus alpha_key of the canonical process; equal keys mean the
// configurations are identified up to structural congruence.
std::string config_key(const Configuration& c);

std::string state_text(ChannelState s);

}  // namespace pir
