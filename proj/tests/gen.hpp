#pragma once

// Seeded random processes and configurations, plus a deliberately naive
// one-step enumerator used to cross-check the production successor relation.

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pir/ast.hpp"

namespace gen {

struct Rng {
  std::mt19937_64 g;
  explicit Rng(std::uint64_t seed) : g(seed) {}
  int pick(int n) { return static_cast<int>(g() % static_cast<std::uint64_t>(n)); }
  bool coin() { return pick(2) == 0; }
};

inline const std::vector<std::string>& name_pool() {
  static const std::vector<std::string> pool{"a", "b", "c", "d"};
  return pool;
}

struct GenState {
  Rng* rng;
  std::vector<std::string> vars;   // in-scope input/alloc binders
  std::vector<std::string> pvars;  // in-scope recursion binders
  int next_var = 0;
  int next_pvar = 0;
};

inline pir::Ident random_ident(GenState& st) {
  if (!st.vars.empty() && st.rng->pick(3) == 0)
    return pir::var(st.vars[st.rng->pick(static_cast<int>(st.vars.size()))]);
  return pir::name(name_pool()[st.rng->pick(4)]);
}

// Builds a process with at most `budget` prefix constructs. Every variable
// and process variable occurrence is bound, so the result is closed once
// the free names are covered by a store.
inline pir::ProcPtr random_process(GenState& st, int budget) {
  Rng& rng = *st.rng;
  if (budget <= 0) {
    if (!st.pvars.empty() && rng.pick(3) == 0)
      return pir::make_pvar(st.pvars[rng.pick(static_cast<int>(st.pvars.size()))]);
    return pir::make_nil();
  }
  switch (rng.pick(10)) {
    case 0:
    case 1: {  // output
      std::vector<pir::Ident> objects;
      int arity = rng.pick(3);
      for (int i = 0; i < arity; ++i) objects.push_back(random_ident(st));
      return pir::make_output(random_ident(st), std::move(objects),
                              random_process(st, budget - 1));
    }
    case 2:
    case 3: {  // input
      int arity = rng.pick(3);
      std::vector<std::string> params;
      size_t depth = st.vars.size();
      for (int i = 0; i < arity; ++i) {
        params.push_back("v" + std::to_string(st.next_var++));
        st.vars.push_back(params.back());
      }
      pir::ProcPtr cont = random_process(st, budget - 1);
      st.vars.resize(depth);
      return pir::make_input(random_ident(st), std::move(params), std::move(cont));
    }
    case 4: {  // match
      int left = (budget - 1) / 2;
      pir::ProcPtr t = random_process(st, left);
      pir::ProcPtr e = random_process(st, budget - 1 - left);
      return pir::make_match(random_ident(st), random_ident(st), std::move(t),
                             std::move(e));
    }
    case 5: {  // recursion
      std::string binder = "R" + std::to_string(st.next_pvar++);
      st.pvars.push_back(binder);
      pir::ProcPtr body = random_process(st, budget - 1);
      st.pvars.pop_back();
      return pir::make_rec(binder, std::move(body));
    }
    case 6: {  // parallel
      int left = budget / 2;
      pir::ProcPtr l = random_process(st, left);
      pir::ProcPtr r = random_process(st, budget - left);
      return pir::make_par(std::move(l), std::move(r));
    }
    case 7: {  // scoping, allocated or deallocated
      std::string name = name_pool()[rng.pick(4)];
      pir::ChannelState state = rng.coin() ? pir::ChannelState::Allocated
                                           : pir::ChannelState::Deallocated;
      return pir::make_scope(name, state, random_process(st, budget - 1));
    }
    case 8: {  // alloc
      std::string binder = "v" + std::to_string(st.next_var++);
      st.vars.push_back(binder);
      pir::ProcPtr body = random_process(st, budget - 1);
      st.vars.pop_back();
      return pir::make_alloc(binder, std::move(body));
    }
    default:  // free
      return pir::make_free(random_ident(st), random_process(st, budget - 1));
  }
}

inline pir::ProcPtr random_process(std::uint64_t seed, int budget) {
  Rng rng(seed);
  GenState st{&rng, {}, {}, 0, 0};
  return random_process(st, budget);
}

inline pir::Configuration random_config(std::uint64_t seed, int budget = 6) {
  Rng rng(seed);
  GenState st{&rng, {}, {}, 0, 0};
  pir::ProcPtr p = random_process(st, budget);
  std::map<std::string, pir::ChannelState> store;
  for (const auto& n : name_pool())
    store[n] = rng.coin() ? pir::ChannelState::Allocated
                          : pir::ChannelState::Deallocated;
  return pir::make_configuration(std::move(store), std::move(p));
}

// ---------------------------------------------------------------------------
// processes typable by construction

// Targets the four-channel environment of the validation tests: a carries
// nothing, b and c carry one and two unrestricted unit channels, d carries
// one but is itself affine. Every emitted object is unit-typed (the name a or
// an input-bound variable), d is spent at most once per branch and never
// under a recursion, and alloc/new binders are freed on the spot.
struct TypedGen {
  Rng* rng;
  std::vector<std::string> units;  // unit-typed input parameters in scope
  std::string pvar;                // innermost recursion binder, if any
  int next_var = 0;
  int next_pvar = 0;
  int next_name = 0;
  bool d_ok = true;
};

inline pir::Ident typed_object(TypedGen& st) {
  if (!st.units.empty() && st.rng->coin())
    return pir::var(st.units[st.rng->pick(static_cast<int>(st.units.size()))]);
  return pir::name("a");
}

inline pir::ProcPtr well_typed_process(TypedGen& st, int budget) {
  Rng& rng = *st.rng;
  if (budget <= 0) {
    if (!st.pvar.empty() && rng.pick(3) == 0) return pir::make_pvar(st.pvar);
    return pir::make_nil();
  }
  switch (rng.pick(12)) {
    case 0:
      return pir::make_output(pir::name("a"), {}, well_typed_process(st, budget - 1));
    case 1:
      return pir::make_input(pir::name("a"), {}, well_typed_process(st, budget - 1));
    case 2: {
      pir::Ident o = typed_object(st);
      return pir::make_output(pir::name("b"), {o}, well_typed_process(st, budget - 1));
    }
    case 3: {
      std::string x = "v" + std::to_string(st.next_var++);
      st.units.push_back(x);
      pir::ProcPtr cont = well_typed_process(st, budget - 1);
      st.units.pop_back();
      return pir::make_input(pir::name("b"), {x}, std::move(cont));
    }
    case 4: {
      pir::Ident o1 = typed_object(st), o2 = typed_object(st);
      return pir::make_output(pir::name("c"), {o1, o2},
                              well_typed_process(st, budget - 1));
    }
    case 5: {
      std::string x = "v" + std::to_string(st.next_var++);
      std::string y = "v" + std::to_string(st.next_var++);
      st.units.push_back(x);
      st.units.push_back(y);
      pir::ProcPtr cont = well_typed_process(st, budget - 1);
      st.units.pop_back();
      st.units.pop_back();
      return pir::make_input(pir::name("c"), {x, y}, std::move(cont));
    }
    case 6: {  // the affine channel, spent once
      if (!st.d_ok)
        return pir::make_output(pir::name("a"), {}, well_typed_process(st, budget - 1));
      st.d_ok = false;
      if (rng.coin()) {
        pir::Ident o = typed_object(st);
        return pir::make_output(pir::name("d"), {o}, well_typed_process(st, budget - 1));
      }
      std::string x = "v" + std::to_string(st.next_var++);
      st.units.push_back(x);
      pir::ProcPtr cont = well_typed_process(st, budget - 1);
      st.units.pop_back();
      return pir::make_input(pir::name("d"), {x}, std::move(cont));
    }
    case 7: {  // match over channel assumptions; the branches are alternatives
      pir::Ident l = rng.coin() ? typed_object(st)
                                : pir::name(name_pool()[rng.pick(3)]);
      pir::Ident r = rng.coin() ? typed_object(st)
                                : pir::name(name_pool()[rng.pick(3)]);
      int half = (budget - 1) / 2;
      bool saved = st.d_ok;
      pir::ProcPtr t = well_typed_process(st, half);
      bool spent_then = saved && !st.d_ok;
      st.d_ok = saved;  // both branches see the same assumptions
      pir::ProcPtr e = well_typed_process(st, budget - 1 - half);
      bool spent_else = saved && !st.d_ok;
      st.d_ok = saved && !spent_then && !spent_else;
      return pir::make_match(l, r, std::move(t), std::move(e));
    }
    case 8: {  // parallel; d can only travel to one side
      int half = budget / 2;
      bool saved = st.d_ok;
      bool left_gets_d = rng.coin();
      st.d_ok = saved && left_gets_d;
      pir::ProcPtr l = well_typed_process(st, half);
      bool spent_left = saved && left_gets_d && !st.d_ok;
      st.d_ok = saved && !left_gets_d;
      pir::ProcPtr r = well_typed_process(st, budget - half);
      bool spent_right = saved && !left_gets_d && !st.d_ok;
      st.d_ok = saved && !spent_left && !spent_right;
      return pir::make_par(std::move(l), std::move(r));
    }
    case 9: {  // recursion; the affine channel and outer binders stay outside
      std::string binder = "R" + std::to_string(st.next_pvar++);
      std::string outer_pvar = st.pvar;
      bool saved = st.d_ok;
      st.pvar = binder;
      st.d_ok = false;
      pir::ProcPtr body = well_typed_process(st, budget - 1);
      st.pvar = outer_pvar;
      st.d_ok = saved;
      return pir::make_rec(binder, std::move(body));
    }
    case 10: {  // allocate, then free on the spot
      std::string x = "v" + std::to_string(st.next_var++);
      return pir::make_alloc(
          x, pir::make_free(pir::var(x), well_typed_process(st, budget - 1)));
    }
    default: {  // restriction, dead or freed immediately
      std::string n = "n" + std::to_string(st.next_name++);
      if (rng.coin())
        return pir::make_scope(n, pir::ChannelState::Deallocated,
                               well_typed_process(st, budget - 1));
      return pir::make_scope(
          n, pir::ChannelState::Allocated,
          pir::make_free(pir::name(n), well_typed_process(st, budget - 1)));
    }
  }
}

inline pir::ProcPtr well_typed_process(std::uint64_t seed, int budget) {
  Rng rng(seed);
  TypedGen st{&rng, {}, "", 0, 0, 0, true};
  return well_typed_process(st, budget);
}

// ---------------------------------------------------------------------------
// naive one-step oracle

struct FlatConfig {
  std::map<std::string, pir::ChannelState> store;
  std::vector<std::pair<std::string, pir::ChannelState>> binders;
  std::vector<pir::ProcPtr> threads;
};

// Hoists every restriction reachable over parallel compositions. The process
// is normalized first, which leaves the hoisted binders named apart already,
// so witness channels keep the spellings the production detector reports.
inline void naive_flatten(const pir::ProcPtr& p, FlatConfig& out) {
  if (pir::holds<pir::ParP>(p)) {
    const auto& n = pir::get<pir::ParP>(p);
    naive_flatten(n.left, out);
    naive_flatten(n.right, out);
  } else if (pir::holds<pir::ScopeP>(p)) {
    const auto& n = pir::get<pir::ScopeP>(p);
    out.binders.emplace_back(n.name, n.state);
    naive_flatten(n.body, out);
  } else if (!pir::holds<pir::NilP>(p)) {
    out.threads.push_back(p);
  }
}

inline FlatConfig naive_flatten(const pir::Configuration& c) {
  FlatConfig out;
  out.store = c.store;
  naive_flatten(pir::canonical_form(c.process), out);
  return out;
}

inline const pir::ChannelState* naive_state(const FlatConfig& f,
                                            const std::string& name) {
  for (auto it = f.binders.rbegin(); it != f.binders.rend(); ++it)
    if (it->first == name) return &it->second;
  auto it = f.store.find(name);
  return it == f.store.end() ? nullptr : &it->second;
}

inline pir::Configuration naive_rebuild(const FlatConfig& f,
                                        const std::vector<pir::ProcPtr>& threads) {
  pir::ProcPtr body = pir::make_nil();
  bool first = true;
  for (const auto& t : threads) {
    body = first ? t : pir::make_par(body, t);
    first = false;
  }
  for (auto it = f.binders.rbegin(); it != f.binders.rend(); ++it)
    body = pir::make_scope(it->first, it->second, body);
  return pir::make_configuration(f.store, body);
}

// Every configuration reachable in one step, as config keys.
inline std::set<std::string> naive_successor_keys(const pir::Configuration& c) {
  FlatConfig f = naive_flatten(c);
  std::set<std::string> keys;
  std::set<std::string> taken;  // names used anywhere, for fresh allocation
  for (const auto& [n, s] : f.store) taken.insert(n);
  for (const auto& [n, s] : f.binders) taken.insert(n);
  for (const auto& t : f.threads) {
    auto fn = pir::all_names(t);
    taken.insert(fn.begin(), fn.end());
  }

  for (size_t i = 0; i < f.threads.size(); ++i) {
    const pir::ProcPtr& t = f.threads[i];
    if (pir::holds<pir::RecP>(t)) {
      const auto& n = pir::get<pir::RecP>(t);
      auto threads = f.threads;
      threads[i] = pir::subst_procvar(n.body, n.binder, t);
      keys.insert(pir::config_key(naive_rebuild(f, threads)));
    } else if (pir::holds<pir::MatchP>(t)) {
      const auto& n = pir::get<pir::MatchP>(t);
      auto threads = f.threads;
      threads[i] = n.left.text == n.right.text ? n.then_branch : n.else_branch;
      keys.insert(pir::config_key(naive_rebuild(f, threads)));
    } else if (pir::holds<pir::AllocP>(t)) {
      const auto& n = pir::get<pir::AllocP>(t);
      std::string fresh = "h0";
      for (int k = 1; taken.count(fresh); ++k) fresh = "h" + std::to_string(k);
      auto threads = f.threads;
      threads[i] = pir::make_scope(
          fresh, pir::ChannelState::Allocated,
          pir::subst_names(n.body, {{n.binder, fresh}}));
      keys.insert(pir::config_key(naive_rebuild(f, threads)));
    } else if (pir::holds<pir::FreeP>(t)) {
      const auto& n = pir::get<pir::FreeP>(t);
      const pir::ChannelState* s = naive_state(f, n.subject.text);
      if (s == nullptr || *s != pir::ChannelState::Allocated) continue;
      FlatConfig g = f;
      bool in_binders = false;
      for (auto it = g.binders.rbegin(); it != g.binders.rend(); ++it)
        if (it->first == n.subject.text) {
          it->second = pir::ChannelState::Deallocated;
          in_binders = true;
          break;
        }
      if (!in_binders) g.store[n.subject.text] = pir::ChannelState::Deallocated;
      auto threads = g.threads;
      threads[i] = n.cont;
      keys.insert(pir::config_key(naive_rebuild(g, threads)));
    }
  }

  for (size_t i = 0; i < f.threads.size(); ++i) {
    if (!pir::holds<pir::OutputP>(f.threads[i])) continue;
    const auto& out = pir::get<pir::OutputP>(f.threads[i]);
    const pir::ChannelState* s = naive_state(f, out.subject.text);
    if (s == nullptr || *s != pir::ChannelState::Allocated) continue;
    for (size_t j = 0; j < f.threads.size(); ++j) {
      if (i == j || !pir::holds<pir::InputP>(f.threads[j])) continue;
      const auto& in = pir::get<pir::InputP>(f.threads[j]);
      if (in.subject.text != out.subject.text) continue;
      if (in.params.size() != out.objects.size()) continue;
      std::vector<std::pair<std::string, std::string>> sub;
      for (size_t k = 0; k < in.params.size(); ++k)
        sub.emplace_back(in.params[k], out.objects[k].text);
      auto threads = f.threads;
      threads[i] = out.cont;
      threads[j] = pir::subst_names(in.cont, sub);
      keys.insert(pir::config_key(naive_rebuild(f, threads)));
    }
  }
  return keys;
}

// Error redexes as "rule channel out in" strings, one entry per redex.
inline std::multiset<std::string> naive_witnesses(const pir::Configuration& c) {
  FlatConfig f = naive_flatten(c);
  std::multiset<std::string> out;
  for (size_t i = 0; i < f.threads.size(); ++i) {
    const pir::ProcPtr& t = f.threads[i];
    if (pir::holds<pir::OutputP>(t)) {
      const auto& n = pir::get<pir::OutputP>(t);
      const pir::ChannelState* s = naive_state(f, n.subject.text);
      if (s && *s == pir::ChannelState::Deallocated)
        out.insert("eOut " + n.subject.text);
    } else if (pir::holds<pir::InputP>(t)) {
      const auto& n = pir::get<pir::InputP>(t);
      const pir::ChannelState* s = naive_state(f, n.subject.text);
      if (s && *s == pir::ChannelState::Deallocated)
        out.insert("eIn " + n.subject.text);
    }
  }
  for (size_t i = 0; i < f.threads.size(); ++i) {
    if (!pir::holds<pir::OutputP>(f.threads[i])) continue;
    const auto& o = pir::get<pir::OutputP>(f.threads[i]);
    for (size_t j = 0; j < f.threads.size(); ++j) {
      if (i == j || !pir::holds<pir::InputP>(f.threads[j])) continue;
      const auto& in = pir::get<pir::InputP>(f.threads[j]);
      if (in.subject.text != o.subject.text) continue;
      if (in.params.size() == o.objects.size()) continue;
      out.insert("eAty " + o.subject.text + " " + std::to_string(o.objects.size()) +
                 " " + std::to_string(in.params.size()));
    }
  }
  return out;
}

}  // namespace gen
