#include "pir/ast.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace pir {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

ProcPtr wrap(Process p) { return std::make_shared<const Process>(std::move(p)); }

// Scope names being extruded by canonical_form are parked under reserved
// spellings that no parser token can produce, so they never collide with
// user names while the final names are being chosen.
constexpr char kTempMark = '\x01';

bool is_temp(const std::string& s) { return !s.empty() && s[0] == kTempMark; }

std::atomic<long> temp_seq{0};

std::string next_temp() {
  return std::string(1, kTempMark) + std::to_string(temp_seq++);
}

}  // namespace

ProcPtr make_output(Ident subject, std::vector<Ident> objects, ProcPtr cont) {
  return wrap({OutputP{std::move(subject), std::move(objects), std::move(cont)}});
}

ProcPtr make_input(Ident subject, std::vector<std::string> params, ProcPtr cont) {
  for (size_t i = 0; i < params.size(); ++i)
    for (size_t j = i + 1; j < params.size(); ++j)
      if (params[i] == params[j])
        throw std::invalid_argument("input parameters must be pairwise distinct");
  return wrap({InputP{std::move(subject), std::move(params), std::move(cont)}});
}

ProcPtr make_nil() { return wrap({NilP{}}); }

ProcPtr make_match(Ident left, Ident right, ProcPtr then_branch, ProcPtr else_branch) {
  return wrap({MatchP{std::move(left), std::move(right), std::move(then_branch),
                      std::move(else_branch)}});
}

ProcPtr make_rec(std::string binder, ProcPtr body) {
  return wrap({RecP{std::move(binder), std::move(body)}});
}

ProcPtr make_pvar(std::string label) { return wrap({PVarP{std::move(label)}}); }

ProcPtr make_par(ProcPtr left, ProcPtr right) {
  return wrap({ParP{std::move(left), std::move(right)}});
}

ProcPtr make_scope(std::string name, ChannelState state, ProcPtr body) {
  return wrap({ScopeP{std::move(name), state, std::move(body)}});
}

ProcPtr make_alloc(std::string binder, ProcPtr body) {
  return wrap({AllocP{std::move(binder), std::move(body)}});
}

ProcPtr make_free(Ident subject, ProcPtr cont) {
  return wrap({FreeP{std::move(subject), std::move(cont)}});
}

// ---------------------------------------------------------------------------
// free occurrence sets

namespace {

enum class Space { Name, Var, ProcVar };

void walk_free(const ProcPtr& p, Space space, std::set<std::string>& bound,
               std::set<std::string>& out) {
  auto see = [&](const Ident& id) {
    if (space == Space::Name && id.kind == IdKind::Name && !bound.count(id.text))
      out.insert(id.text);
    if (space == Space::Var && id.kind == IdKind::Var && !bound.count(id.text))
      out.insert(id.text);
  };
  // Runs the body with `extra` temporarily added to the bound set when it
  // binds in the namespace we are collecting.
  auto under = [&](const std::vector<std::string>& extra, Space binder_space,
                   auto&& fn) {
    std::vector<std::string> added;
    if (binder_space == space)
      for (const auto& b : extra)
        if (bound.insert(b).second) added.push_back(b);
    fn();
    for (const auto& b : added) bound.erase(b);
  };
  std::visit(
      Overloaded{
          [&](const OutputP& n) {
            see(n.subject);
            for (const auto& o : n.objects) see(o);
            walk_free(n.cont, space, bound, out);
          },
          [&](const InputP& n) {
            see(n.subject);
            under(n.params, Space::Var,
                  [&] { walk_free(n.cont, space, bound, out); });
          },
          [&](const NilP&) {},
          [&](const MatchP& n) {
            see(n.left);
            see(n.right);
            walk_free(n.then_branch, space, bound, out);
            walk_free(n.else_branch, space, bound, out);
          },
          [&](const RecP& n) {
            under({n.binder}, Space::ProcVar,
                  [&] { walk_free(n.body, space, bound, out); });
          },
          [&](const PVarP& n) {
            if (space == Space::ProcVar && !bound.count(n.label))
              out.insert(n.label);
          },
          [&](const ParP& n) {
            walk_free(n.left, space, bound, out);
            walk_free(n.right, space, bound, out);
          },
          [&](const ScopeP& n) {
            under({n.name}, Space::Name,
                  [&] { walk_free(n.body, space, bound, out); });
          },
          [&](const AllocP& n) {
            under({n.binder}, Space::Var,
                  [&] { walk_free(n.body, space, bound, out); });
          },
          [&](const FreeP& n) {
            see(n.subject);
            walk_free(n.cont, space, bound, out);
          },
      },
      p->node);
}

std::set<std::string> free_of(const ProcPtr& p, Space space) {
  std::set<std::string> bound, out;
  walk_free(p, space, bound, out);
  return out;
}

}  // namespace

std::set<std::string> free_names(const ProcPtr& p) { return free_of(p, Space::Name); }
std::set<std::string> free_vars(const ProcPtr& p) { return free_of(p, Space::Var); }
std::set<std::string> free_procvars(const ProcPtr& p) {
  return free_of(p, Space::ProcVar);
}

std::set<std::string> all_names(const ProcPtr& p) {
  std::set<std::string> out;
  std::function<void(const ProcPtr&)> go = [&](const ProcPtr& q) {
    std::visit(Overloaded{
                   [&](const OutputP& n) {
                     if (n.subject.kind == IdKind::Name) out.insert(n.subject.text);
                     for (const auto& o : n.objects)
                       if (o.kind == IdKind::Name) out.insert(o.text);
                     go(n.cont);
                   },
                   [&](const InputP& n) {
                     if (n.subject.kind == IdKind::Name) out.insert(n.subject.text);
                     go(n.cont);
                   },
                   [&](const NilP&) {},
                   [&](const MatchP& n) {
                     if (n.left.kind == IdKind::Name) out.insert(n.left.text);
                     if (n.right.kind == IdKind::Name) out.insert(n.right.text);
                     go(n.then_branch);
                     go(n.else_branch);
                   },
                   [&](const RecP& n) { go(n.body); },
                   [&](const PVarP&) {},
                   [&](const ParP& n) {
                     go(n.left);
                     go(n.right);
                   },
                   [&](const ScopeP& n) {
                     out.insert(n.name);
                     go(n.body);
                   },
                   [&](const AllocP& n) { go(n.body); },
                   [&](const FreeP& n) {
                     if (n.subject.kind == IdKind::Name) out.insert(n.subject.text);
                     go(n.cont);
                   },
               },
               q->node);
  };
  go(p);
  return out;
}

std::string fresh_name(const std::string& base, const std::set<std::string>& avoid) {
  std::string stem = base;
  while (!stem.empty() && std::isdigit(static_cast<unsigned char>(stem.back())))
    stem.pop_back();
  if (stem.empty() || is_temp(stem)) stem = "c";
  for (long i = 0;; ++i) {
    std::string candidate = stem + std::to_string(i);
    if (!avoid.count(candidate)) return candidate;
  }
}

// ---------------------------------------------------------------------------
// substitution

namespace {

// var_map sends free Vars to replacement identifiers (Names for the
// reduction rules, Vars for internal binder renaming); name_map renames free
// Names. Scope binders that would capture a replacement are renamed first.
ProcPtr apply_subst(const ProcPtr& p, std::map<std::string, Ident> var_map,
                    std::map<std::string, std::string> name_map);

ProcPtr subst_children(const ProcPtr& p, const std::map<std::string, Ident>& vm,
                       const std::map<std::string, std::string>& nm) {
  auto res_ident = [&](const Ident& id) -> Ident {
    if (id.kind == IdKind::Var) {
      auto it = vm.find(id.text);
      if (it != vm.end()) return it->second;
      return id;
    }
    auto it = nm.find(id.text);
    if (it != nm.end()) return name(it->second);
    return id;
  };
  return std::visit(
      Overloaded{
          [&](const OutputP& n) {
            std::vector<Ident> objects;
            objects.reserve(n.objects.size());
            for (const auto& o : n.objects) objects.push_back(res_ident(o));
            return make_output(res_ident(n.subject), std::move(objects),
                               apply_subst(n.cont, vm, nm));
          },
          [&](const InputP& n) {
            auto vm2 = vm;
            for (const auto& x : n.params) vm2.erase(x);
            // A Var binder can only capture a replacement that is itself a
            // Var; rename the binder out of the way in that case.
            std::set<std::string> var_ranges;
            auto fv = free_vars(n.cont);
            for (const auto& [from, to] : vm2)
              if (to.kind == IdKind::Var && fv.count(from)) var_ranges.insert(to.text);
            std::vector<std::string> params = n.params;
            ProcPtr cont = n.cont;
            for (auto& x : params) {
              if (!var_ranges.count(x)) continue;
              std::set<std::string> avoid = var_ranges;
              for (const auto& v : free_vars(cont)) avoid.insert(v);
              for (const auto& [from, to] : vm2) avoid.insert(from);
              std::string fresh = fresh_name(x, avoid);
              cont = apply_subst(cont, {{x, var(fresh)}}, {});
              x = fresh;
            }
            return make_input(res_ident(n.subject), std::move(params),
                              apply_subst(cont, vm2, nm));
          },
          [&](const NilP&) { return make_nil(); },
          [&](const MatchP& n) {
            return make_match(res_ident(n.left), res_ident(n.right),
                              apply_subst(n.then_branch, vm, nm),
                              apply_subst(n.else_branch, vm, nm));
          },
          [&](const RecP& n) { return make_rec(n.binder, apply_subst(n.body, vm, nm)); },
          [&](const PVarP& n) { return make_pvar(n.label); },
          [&](const ParP& n) {
            return make_par(apply_subst(n.left, vm, nm), apply_subst(n.right, vm, nm));
          },
          [&](const ScopeP& n) {
            auto nm2 = nm;
            nm2.erase(n.name);
            std::set<std::string> ranges;
            auto fvb = free_vars(n.body);
            auto fnb = free_names(n.body);
            for (const auto& [from, to] : vm)
              if (to.kind == IdKind::Name && fvb.count(from)) ranges.insert(to.text);
            for (const auto& [from, to] : nm2)
              if (fnb.count(from)) ranges.insert(to);
            std::string binder = n.name;
            ProcPtr body = n.body;
            if (ranges.count(binder)) {
              std::set<std::string> avoid = ranges;
              for (const auto& a : all_names(body)) avoid.insert(a);
              std::string fresh = fresh_name(binder, avoid);
              body = apply_subst(body, {}, {{binder, fresh}});
              binder = fresh;
            }
            return make_scope(binder, n.state, apply_subst(body, vm, nm2));
          },
          [&](const AllocP& n) {
            auto vm2 = vm;
            vm2.erase(n.binder);
            std::set<std::string> var_ranges;
            auto fv = free_vars(n.body);
            for (const auto& [from, to] : vm2)
              if (to.kind == IdKind::Var && fv.count(from)) var_ranges.insert(to.text);
            std::string binder = n.binder;
            ProcPtr body = n.body;
            if (var_ranges.count(binder)) {
              std::set<std::string> avoid = var_ranges;
              for (const auto& v : free_vars(body)) avoid.insert(v);
              std::string fresh = fresh_name(binder, avoid);
              body = apply_subst(body, {{binder, var(fresh)}}, {});
              binder = fresh;
            }
            return make_alloc(binder, apply_subst(body, vm2, nm));
          },
          [&](const FreeP& n) {
            return make_free(res_ident(n.subject), apply_subst(n.cont, vm, nm));
          },
      },
      p->node);
}

ProcPtr apply_subst(const ProcPtr& p, std::map<std::string, Ident> var_map,
                    std::map<std::string, std::string> name_map) {
  if (var_map.empty() && name_map.empty()) return p;
  return subst_children(p, var_map, name_map);
}

}  // namespace

ProcPtr subst_names(const ProcPtr& p,
                    const std::vector<std::pair<std::string, std::string>>& subs) {
  std::map<std::string, Ident> vm;
  for (const auto& [from, to] : subs) {
    if (!vm.emplace(from, name(to)).second)
      throw std::invalid_argument("duplicate variable in substitution: " + from);
  }
  return apply_subst(p, std::move(vm), {});
}

ProcPtr rename_free_name(const ProcPtr& p, const std::string& from,
                         const std::string& to) {
  if (from == to) return p;
  return apply_subst(p, {}, {{from, to}});
}

ProcPtr subst_procvar(const ProcPtr& p, const std::string& label, const ProcPtr& body) {
  auto fnB = free_names(body);
  auto fvB = free_vars(body);
  auto fpB = free_procvars(body);
  std::function<ProcPtr(const ProcPtr&)> go = [&](const ProcPtr& q) -> ProcPtr {
    if (!free_procvars(q).count(label)) return q;
    return std::visit(
        Overloaded{
            [&](const OutputP& n) {
              return make_output(n.subject, n.objects, go(n.cont));
            },
            [&](const InputP& n) {
              std::vector<std::string> params = n.params;
              ProcPtr cont = n.cont;
              for (auto& x : params) {
                if (!fvB.count(x)) continue;
                std::set<std::string> avoid = fvB;
                for (const auto& v : free_vars(cont)) avoid.insert(v);
                std::string fresh = fresh_name(x, avoid);
                cont = apply_subst(cont, {{x, var(fresh)}}, {});
                x = fresh;
              }
              return make_input(n.subject, std::move(params), go(cont));
            },
            [&](const NilP&) { return q; },
            [&](const MatchP& n) {
              return make_match(n.left, n.right, go(n.then_branch), go(n.else_branch));
            },
            [&](const RecP& n) {
              if (n.binder == label) return q;
              std::string binder = n.binder;
              ProcPtr inner = n.body;
              if (fpB.count(binder)) {
                std::set<std::string> avoid = fpB;
                for (const auto& v : free_procvars(inner)) avoid.insert(v);
                avoid.insert(label);
                std::string fresh = fresh_name(binder, avoid);
                inner = subst_procvar(inner, binder, make_pvar(fresh));
                binder = fresh;
              }
              return make_rec(binder, go(inner));
            },
            [&](const PVarP& n) { return n.label == label ? body : q; },
            [&](const ParP& n) { return make_par(go(n.left), go(n.right)); },
            [&](const ScopeP& n) {
              std::string binder = n.name;
              ProcPtr inner = n.body;
              if (fnB.count(binder)) {
                std::set<std::string> avoid = fnB;
                for (const auto& a : all_names(inner)) avoid.insert(a);
                std::string fresh = fresh_name(binder, avoid);
                inner = apply_subst(inner, {}, {{binder, fresh}});
                binder = fresh;
              }
              return make_scope(binder, n.state, go(inner));
            },
            [&](const AllocP& n) {
              std::string binder = n.binder;
              ProcPtr inner = n.body;
              if (fvB.count(binder)) {
                std::set<std::string> avoid = fvB;
                for (const auto& v : free_vars(inner)) avoid.insert(v);
                std::string fresh = fresh_name(binder, avoid);
                inner = apply_subst(inner, {{binder, var(fresh)}}, {});
                binder = fresh;
              }
              return make_alloc(binder, go(inner));
            },
            [&](const FreeP& n) { return make_free(n.subject, go(n.cont)); },
        },
        q->node);
  };
  return go(p);
}

// ---------------------------------------------------------------------------
// alpha equivalence and alpha-invariant keys

namespace {

struct BindStacks {
  std::map<std::string, std::vector<int>> names, vars, pvars;
};

struct AlphaCtx {
  BindStacks left, right;
  int counter = 0;
};

std::map<std::string, std::vector<int>>& pick(BindStacks& b, Space s) {
  switch (s) {
    case Space::Name: return b.names;
    case Space::Var: return b.vars;
    default: return b.pvars;
  }
}

bool eq_ident(AlphaCtx& ctx, const Ident& a, const Ident& b) {
  if (a.kind != b.kind) return false;
  Space s = a.kind == IdKind::Name ? Space::Name : Space::Var;
  auto& la = pick(ctx.left, s)[a.text];
  auto& rb = pick(ctx.right, s)[b.text];
  bool ba = !la.empty(), bb = !rb.empty();
  if (ba != bb) return false;
  if (ba) return la.back() == rb.back();
  return a.text == b.text;
}

bool eq_label(AlphaCtx& ctx, const std::string& a, const std::string& b) {
  auto& la = ctx.left.pvars[a];
  auto& rb = ctx.right.pvars[b];
  bool ba = !la.empty(), bb = !rb.empty();
  if (ba != bb) return false;
  if (ba) return la.back() == rb.back();
  return a == b;
}

bool alpha_rec(AlphaCtx& ctx, const ProcPtr& p, const ProcPtr& q) {
  if (p->node.index() != q->node.index()) return false;
  auto bind2 = [&](Space s, const std::string& a, const std::string& b, auto&& fn) {
    int level = ctx.counter++;
    pick(ctx.left, s)[a].push_back(level);
    pick(ctx.right, s)[b].push_back(level);
    bool r = fn();
    pick(ctx.left, s)[a].pop_back();
    pick(ctx.right, s)[b].pop_back();
    return r;
  };
  return std::visit(
      Overloaded{
          [&](const OutputP& a) {
            const auto& b = get<OutputP>(q);
            if (!eq_ident(ctx, a.subject, b.subject)) return false;
            if (a.objects.size() != b.objects.size()) return false;
            for (size_t i = 0; i < a.objects.size(); ++i)
              if (!eq_ident(ctx, a.objects[i], b.objects[i])) return false;
            return alpha_rec(ctx, a.cont, b.cont);
          },
          [&](const InputP& a) {
            const auto& b = get<InputP>(q);
            if (!eq_ident(ctx, a.subject, b.subject)) return false;
            if (a.params.size() != b.params.size()) return false;
            std::function<bool(size_t)> go = [&](size_t i) -> bool {
              if (i == a.params.size()) return alpha_rec(ctx, a.cont, b.cont);
              return bind2(Space::Var, a.params[i], b.params[i],
                           [&] { return go(i + 1); });
            };
            return go(0);
          },
          [&](const NilP&) { return true; },
          [&](const MatchP& a) {
            const auto& b = get<MatchP>(q);
            return eq_ident(ctx, a.left, b.left) && eq_ident(ctx, a.right, b.right) &&
                   alpha_rec(ctx, a.then_branch, b.then_branch) &&
                   alpha_rec(ctx, a.else_branch, b.else_branch);
          },
          [&](const RecP& a) {
            const auto& b = get<RecP>(q);
            return bind2(Space::ProcVar, a.binder, b.binder,
                         [&] { return alpha_rec(ctx, a.body, b.body); });
          },
          [&](const PVarP& a) { return eq_label(ctx, a.label, get<PVarP>(q).label); },
          [&](const ParP& a) {
            const auto& b = get<ParP>(q);
            return alpha_rec(ctx, a.left, b.left) && alpha_rec(ctx, a.right, b.right);
          },
          [&](const ScopeP& a) {
            const auto& b = get<ScopeP>(q);
            if (a.state != b.state) return false;
            return bind2(Space::Name, a.name, b.name,
                         [&] { return alpha_rec(ctx, a.body, b.body); });
          },
          [&](const AllocP& a) {
            const auto& b = get<AllocP>(q);
            return bind2(Space::Var, a.binder, b.binder,
                         [&] { return alpha_rec(ctx, a.body, b.body); });
          },
          [&](const FreeP& a) {
            const auto& b = get<FreeP>(q);
            return eq_ident(ctx, a.subject, b.subject) && alpha_rec(ctx, a.cont, b.cont);
          },
      },
      p->node);
}

struct KeyCtx {
  BindStacks binds;
  int counter = 0;
  const std::map<std::string, ChannelState>* temps = nullptr;
};

void key_ident(KeyCtx& ctx, const Ident& id, std::string& out) {
  Space s = id.kind == IdKind::Name ? Space::Name : Space::Var;
  auto& stack = pick(ctx.binds, s)[id.text];
  if (!stack.empty()) {
    out += 'b';
    out += std::to_string(stack.back());
    return;
  }
  if (ctx.temps && id.kind == IdKind::Name) {
    auto it = ctx.temps->find(id.text);
    if (it != ctx.temps->end()) {
      out += it->second == ChannelState::Allocated ? "#A" : "#D";
      return;
    }
  }
  out += id.kind == IdKind::Name ? 'n' : 'v';
  out += id.text;
  out += ';';
}

void key_rec(KeyCtx& ctx, const ProcPtr& p, std::string& out) {
  auto bind = [&](Space s, const std::string& text, auto&& fn) {
    pick(ctx.binds, s)[text].push_back(ctx.counter++);
    fn();
    pick(ctx.binds, s)[text].pop_back();
  };
  std::visit(Overloaded{
                 [&](const OutputP& n) {
                   out += '!';
                   key_ident(ctx, n.subject, out);
                   out += '(';
                   for (const auto& o : n.objects) key_ident(ctx, o, out);
                   out += ')';
                   key_rec(ctx, n.cont, out);
                 },
                 [&](const InputP& n) {
                   out += '?';
                   key_ident(ctx, n.subject, out);
                   out += '(';
                   out += std::to_string(n.params.size());
                   out += ')';
                   std::function<void(size_t)> go = [&](size_t i) {
                     if (i == n.params.size()) {
                       key_rec(ctx, n.cont, out);
                       return;
                     }
                     bind(Space::Var, n.params[i], [&] { go(i + 1); });
                   };
                   go(0);
                 },
                 [&](const NilP&) { out += '0'; },
                 [&](const MatchP& n) {
                   out += 'm';
                   key_ident(ctx, n.left, out);
                   key_ident(ctx, n.right, out);
                   out += '{';
                   key_rec(ctx, n.then_branch, out);
                   out += "}{";
                   key_rec(ctx, n.else_branch, out);
                   out += '}';
                 },
                 [&](const RecP& n) {
                   out += "r{";
                   bind(Space::ProcVar, n.binder, [&] { key_rec(ctx, n.body, out); });
                   out += '}';
                 },
                 [&](const PVarP& n) {
                   auto& stack = ctx.binds.pvars[n.label];
                   if (!stack.empty()) {
                     out += 'B';
                     out += std::to_string(stack.back());
                   } else {
                     out += 'p';
                     out += n.label;
                     out += ';';
                   }
                 },
                 [&](const ParP& n) {
                   out += '(';
                   key_rec(ctx, n.left, out);
                   out += '|';
                   key_rec(ctx, n.right, out);
                   out += ')';
                 },
                 [&](const ScopeP& n) {
                   out += n.state == ChannelState::Allocated ? "vA{" : "vD{";
                   bind(Space::Name, n.name, [&] { key_rec(ctx, n.body, out); });
                   out += '}';
                 },
                 [&](const AllocP& n) {
                   out += "a{";
                   bind(Space::Var, n.binder, [&] { key_rec(ctx, n.body, out); });
                   out += '}';
                 },
                 [&](const FreeP& n) {
                   out += 'f';
                   key_ident(ctx, n.subject, out);
                   out += '.';
                   key_rec(ctx, n.cont, out);
                 },
             },
             p->node);
}

std::string key_of(const ProcPtr& p, const std::map<std::string, ChannelState>* temps) {
  KeyCtx ctx;
  ctx.temps = temps;
  std::string out;
  key_rec(ctx, p, out);
  return out;
}

}  // namespace

bool alpha_eq(const ProcPtr& p, const ProcPtr& q) {
  AlphaCtx ctx;
  return alpha_rec(ctx, p, q);
}

std::string alpha_key(const ProcPtr& p) { return key_of(p, nullptr); }

// ---------------------------------------------------------------------------
// canonical form

namespace {

struct GroupScope {
  std::string temp;
  ChannelState state;
  std::string orig;
};

// Binding context accumulated on the way down: enclosing prefix binders plus
// every scope parked by an enclosing group. Keys computed against it stay
// independent of binder spellings and of the process-wide temp counter.
struct CanonCtx {
  BindStacks binds;
  int counter = 0;
  std::map<std::string, ChannelState> temps;
};

std::string keyed_in(const CanonCtx& ctx,
                     const std::map<std::string, ChannelState>* temps,
                     const ProcPtr& p) {
  KeyCtx kc;
  kc.binds = ctx.binds;
  kc.counter = ctx.counter;
  kc.temps = temps;
  std::string out;
  key_rec(kc, p, out);
  return out;
}

ProcPtr canon(const ProcPtr& p, CanonCtx& ctx);

void collect_group(const ProcPtr& p, CanonCtx& walk, std::vector<GroupScope>& scopes,
                   std::vector<ProcPtr>& parts) {
  std::visit(Overloaded{
                 [&](const ParP& n) {
                   collect_group(n.left, walk, scopes, parts);
                   collect_group(n.right, walk, scopes, parts);
                 },
                 [&](const ScopeP& n) {
                   std::string temp = next_temp();
                   scopes.push_back({temp, n.state, n.name});
                   walk.temps[temp] = n.state;
                   collect_group(rename_free_name(n.body, n.name, temp), walk, scopes, parts);
                 },
                 [&](const NilP&) {},
                 [&](const auto&) { parts.push_back(canon(p, walk)); },
             },
             p->node);
}

// Free Name occurrences in traversal order, duplicates kept. Drives the
// deterministic assignment of final names to extruded scopes.
void ordered_free_names(const ProcPtr& p, std::set<std::string>& bound,
                        std::vector<std::string>& out) {
  auto see = [&](const Ident& id) {
    if (id.kind == IdKind::Name && !bound.count(id.text)) out.push_back(id.text);
  };
  std::visit(Overloaded{
                 [&](const OutputP& n) {
                   see(n.subject);
                   for (const auto& o : n.objects) see(o);
                   ordered_free_names(n.cont, bound, out);
                 },
                 [&](const InputP& n) {
                   see(n.subject);
                   ordered_free_names(n.cont, bound, out);
                 },
                 [&](const NilP&) {},
                 [&](const MatchP& n) {
                   see(n.left);
                   see(n.right);
                   ordered_free_names(n.then_branch, bound, out);
                   ordered_free_names(n.else_branch, bound, out);
                 },
                 [&](const RecP& n) { ordered_free_names(n.body, bound, out); },
                 [&](const PVarP&) {},
                 [&](const ParP& n) {
                   ordered_free_names(n.left, bound, out);
                   ordered_free_names(n.right, bound, out);
                 },
                 [&](const ScopeP& n) {
                   bool added = bound.insert(n.name).second;
                   ordered_free_names(n.body, bound, out);
                   if (added) bound.erase(n.name);
                 },
                 [&](const AllocP& n) { ordered_free_names(n.body, bound, out); },
                 [&](const FreeP& n) {
                   see(n.subject);
                   ordered_free_names(n.cont, bound, out);
                 },
             },
             p->node);
}

ProcPtr rebuild_group(const std::vector<GroupScope>& scopes,
                      const std::vector<ProcPtr>& parts_in_order) {
  ProcPtr body;
  if (parts_in_order.empty()) {
    body = make_nil();
  } else {
    body = parts_in_order.back();
    for (size_t i = parts_in_order.size() - 1; i-- > 0;)
      body = make_par(parts_in_order[i], body);
  }
  for (size_t i = scopes.size(); i-- > 0;)
    body = make_scope(scopes[i].temp, scopes[i].state, body);
  return body;
}

ProcPtr canonical_group(const CanonCtx& ctx, std::vector<GroupScope> scopes,
                        std::vector<ProcPtr> parts) {
  if (scopes.empty() && parts.size() == 1) return parts[0];

  std::set<std::string> own;
  for (const auto& s : scopes) own.insert(s.temp);

  // This group's scopes and any still-parked enclosing ones all key as
  // anonymous channels, so part order never depends on temp spellings.
  std::map<std::string, ChannelState> temp_state = ctx.temps;
  for (const auto& s : scopes) temp_state[s.temp] = s.state;

  struct Item {
    ProcPtr part;
    std::string key;
  };
  std::vector<Item> items;
  items.reserve(parts.size());
  for (auto& part : parts) items.push_back({part, keyed_in(ctx, &temp_state, part)});
  std::stable_sort(items.begin(), items.end(),
                   [](const Item& a, const Item& b) { return a.key < b.key; });

  // Names every part can see, minus the parked scope names.
  std::set<std::string> avoid_base;
  for (const auto& it : items)
    for (const auto& n : free_names(it.part))
      if (!is_temp(n)) avoid_base.insert(n);

  // Ties between parts whose keys coincide are broken by trying their
  // orderings and keeping the rendering that compares least. Tie groups are
  // tiny in practice; the cap keeps adversarial inputs from exploding.
  std::vector<std::vector<size_t>> orders;
  {
    std::vector<size_t> base(items.size());
    for (size_t i = 0; i < base.size(); ++i) base[i] = i;
    orders.push_back(base);
    size_t budget = 720;
    size_t lo = 0;
    while (lo < items.size()) {
      size_t hi = lo + 1;
      while (hi < items.size() && items[hi].key == items[lo].key) ++hi;
      size_t width = hi - lo;
      if (width > 1 && width <= 4) {
        std::vector<size_t> span(width);
        for (size_t i = 0; i < width; ++i) span[i] = lo + i;
        std::vector<std::vector<size_t>> expanded;
        std::vector<size_t> perm = span;
        do {
          for (const auto& order : orders) {
            if (expanded.size() >= budget) break;
            std::vector<size_t> next = order;
            for (size_t i = 0; i < width; ++i) next[lo + i] = perm[i];
            expanded.push_back(std::move(next));
          }
        } while (std::next_permutation(perm.begin(), perm.end()) &&
                 expanded.size() < budget);
        if (!expanded.empty()) orders = std::move(expanded);
      }
      lo = hi;
    }
  }

  std::map<std::string, std::string> orig_of;
  for (const auto& s : scopes) orig_of[s.temp] = s.orig;

  ProcPtr best;
  std::string best_key;
  for (const auto& order : orders) {
    // Scope order is first occurrence across the candidate part order, with
    // unreferenced scopes after (allocated before deallocated). Spellings are
    // chosen afterwards and never influence structure, so congruent inputs
    // rebuild identically whatever their binders were called.
    std::map<std::string, std::string> final_name;
    std::vector<std::string> first_seen;
    std::set<std::string> avoid = avoid_base;
    auto assign = [&](const std::string& temp) {
      if (final_name.count(temp)) return;
      first_seen.push_back(temp);
      // keep the source spelling unless it collides
      std::string chosen = orig_of[temp];
      if (chosen.empty() || avoid.count(chosen)) chosen = fresh_name("c", avoid);
      avoid.insert(chosen);
      final_name[temp] = chosen;
    };
    for (size_t idx : order) {
      std::set<std::string> bound;
      std::vector<std::string> occurrences;
      ordered_free_names(items[idx].part, bound, occurrences);
      for (const auto& occ : occurrences)
        if (own.count(occ)) assign(occ);  // foreign temps belong to an enclosing group
    }
    std::vector<const GroupScope*> garbage_alloc, garbage_dealloc;
    for (const auto& s : scopes) {
      if (final_name.count(s.temp)) continue;
      if (s.state == ChannelState::Allocated)
        garbage_alloc.push_back(&s);
      else
        garbage_dealloc.push_back(&s);
    }
    for (const auto* s : garbage_alloc) assign(s->temp);
    for (const auto* s : garbage_dealloc) assign(s->temp);

    std::vector<GroupScope> named_scopes;
    for (const auto& t : first_seen)
      named_scopes.push_back({final_name[t], temp_state.at(t), ""});

    std::vector<ProcPtr> renamed;
    renamed.reserve(order.size());
    for (size_t idx : order) {
      ProcPtr part = items[idx].part;
      for (const auto& [temp, fin] : final_name) part = rename_free_name(part, temp, fin);
      renamed.push_back(std::move(part));
    }
    ProcPtr candidate = rebuild_group(named_scopes, renamed);
    std::string key = keyed_in(ctx, &temp_state, candidate);
    if (best == nullptr || key < best_key) {
      best = candidate;
      best_key = key;
    }
  }
  return best;
}

ProcPtr canon(const ProcPtr& p, CanonCtx& ctx) {
  auto grouped = [&] {
    std::vector<GroupScope> scopes;
    std::vector<ProcPtr> parts;
    CanonCtx walk = ctx;
    collect_group(p, walk, scopes, parts);
    return canonical_group(ctx, std::move(scopes), std::move(parts));
  };
  auto under = [&](Space s, const std::string& text, auto&& fn) {
    pick(ctx.binds, s)[text].push_back(ctx.counter++);
    ProcPtr r = fn();
    pick(ctx.binds, s)[text].pop_back();
    return r;
  };
  return std::visit(
      Overloaded{
          [&](const ParP&) { return grouped(); },
          [&](const ScopeP&) { return grouped(); },
          [&](const NilP&) { return make_nil(); },
          [&](const OutputP& n) { return make_output(n.subject, n.objects, canon(n.cont, ctx)); },
          [&](const InputP& n) {
            std::function<ProcPtr(size_t)> go = [&](size_t i) -> ProcPtr {
              if (i == n.params.size()) return canon(n.cont, ctx);
              return under(Space::Var, n.params[i], [&] { return go(i + 1); });
            };
            return make_input(n.subject, n.params, go(0));
          },
          [&](const MatchP& n) {
            return make_match(n.left, n.right, canon(n.then_branch, ctx),
                              canon(n.else_branch, ctx));
          },
          [&](const RecP& n) {
            return make_rec(n.binder, under(Space::ProcVar, n.binder,
                                            [&] { return canon(n.body, ctx); }));
          },
          [&](const PVarP& n) { return make_pvar(n.label); },
          [&](const AllocP& n) {
            return make_alloc(n.binder,
                              under(Space::Var, n.binder, [&] { return canon(n.body, ctx); }));
          },
          [&](const FreeP& n) { return make_free(n.subject, canon(n.cont, ctx)); },
      },
      p->node);
}

}  // namespace

ProcPtr canonical_form(const ProcPtr& p) {
  CanonCtx ctx;
  return canon(p, ctx);
}

// ---------------------------------------------------------------------------
// configurations

Configuration make_configuration(std::map<std::string, ChannelState> store,
                                 ProcPtr process) {
  for (const auto& n : free_names(process)) {
    if (!store.count(n))
      throw std::invalid_argument("free name not covered by store: " + n);
  }
  return Configuration{std::move(store), std::move(process)};
}

bool closed(const Configuration& c) {
  return free_vars(c.process).empty() && free_procvars(c.process).empty();
}

std::string config_key(const Configuration& c) {
  std::string out;
  for (const auto& [name, state] : c.store) {
    out += name;
    out += state == ChannelState::Allocated ? ":A;" : ":D;";
  }
  out += '|';
  out += alpha_key(canonical_form(c.process));
  return out;
}

std::string state_text(ChannelState s) {
  return s == ChannelState::Allocated ? "alloc" : "dealloc";
}

}  // namespace pir
