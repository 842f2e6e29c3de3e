#include "pir/typecheck.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "pir/derivation_io.hpp"
#include "pir/parser.hpp"
#include "pir/semantics.hpp"

namespace pir {

namespace {

Subject subject_of(const Ident& id) {
  return id.kind == IdKind::Name ? name_subject(id.text) : var_subject(id.text);
}

bool is_chan(const Type& t) { return t.kind == Type::Kind::Chan; }

// ---------------------------------------------------------------------------
// validation

struct NodeError {
  std::string path;
  std::string message;
};

std::string join_path(const std::string& path, size_t i) {
  return path.empty() ? std::to_string(i) : path + "." + std::to_string(i);
}

std::string env_diff_note(const TypeEnv& expected, const TypeEnv& actual) {
  return " (expected premise env {" + render_env(expected) + "}, actual {" +
         render_env(actual) + "})";
}

std::optional<NodeError> check_node(const Derivation& d, const std::string& path) {
  auto bad = [&](std::string msg) {
    return NodeError{path, d.rule + ": " + std::move(msg)};
  };
  const std::string& r = d.rule;
  auto premise_count = [&](size_t n) -> std::optional<NodeError> {
    if (d.premises.size() != n)
      return bad("needs " + std::to_string(n) + " premise(s), has " +
                 std::to_string(d.premises.size()));
    return std::nullopt;
  };
  auto same_process = [&](const ProcPtr& q) {
    return alpha_eq(d.premises[0].process, q);
  };

  if (r == "tNil") {
    if (auto e = premise_count(0)) return e;
    if (!holds<NilP>(d.process)) return bad("process is not nil");
    if (!d.env.empty()) return bad("environment must be empty");
  } else if (r == "tVar") {
    if (auto e = premise_count(0)) return e;
    if (!holds<PVarP>(d.process)) return bad("process is not a recursion variable");
    const auto& n = get<PVarP>(d.process);
    TypeEnv want;
    want.add(pvar_subject(n.label), Type::proc());
    if (!(d.env == want))
      return bad("environment must be exactly " + n.label + ":proc");
  } else if (r == "tIn") {
    if (auto e = premise_count(1)) return e;
    if (!holds<InputP>(d.process)) return bad("process is not an input");
    const auto& n = get<InputP>(d.process);
    if (!same_process(n.cont))
      return bad("premise process must be the input continuation");
    for (const auto& x : n.params)
      if (d.env.has_subject(var_subject(x)))
        return bad("input parameter " + x + " is not fresh for the environment");
    Subject subj = subject_of(n.subject);
    std::string note;
    for (const auto& a : d.env.items()) {
      if (!(a.subject == subj) || !is_chan(a.type)) continue;
      if (a.type.objects.size() != n.params.size()) continue;
      Decrement dec = decrement(a.type);
      if (dec.status == Decrement::Status::Undefined) continue;
      TypeEnv expected = d.env;
      expected.remove_one(subj, a.type);
      if (dec.status == Decrement::Status::Ok) expected.add(subj, *dec.type);
      for (size_t i = 0; i < n.params.size(); ++i)
        expected.add(var_subject(n.params[i]), a.type.objects[i]);
      if (expected == d.premises[0].env) {
        note.clear();
        break;
      }
      if (note.empty()) note = env_diff_note(expected, d.premises[0].env);
    }
    if (!note.empty() || !d.env.has_subject(subj))
      return bad("no assumption for " + n.subject.text + " supports this input" + note);
  } else if (r == "tOut") {
    if (auto e = premise_count(1)) return e;
    if (!holds<OutputP>(d.process)) return bad("process is not an output");
    const auto& n = get<OutputP>(d.process);
    if (!same_process(n.cont))
      return bad("premise process must be the output continuation");
    Subject subj = subject_of(n.subject);
    std::string note;
    bool matched = false;
    for (const auto& a : d.env.items()) {
      if (!(a.subject == subj) || !is_chan(a.type)) continue;
      if (a.type.objects.size() != n.objects.size()) continue;
      Decrement dec = decrement(a.type);
      if (dec.status == Decrement::Status::Undefined) continue;
      TypeEnv expected = d.env;
      expected.remove_one(subj, a.type);
      bool objects_ok = true;
      for (size_t i = 0; i < n.objects.size(); ++i) {
        if (!expected.remove_one(subject_of(n.objects[i]), a.type.objects[i])) {
          objects_ok = false;
          break;
        }
      }
      if (!objects_ok) {
        if (note.empty())
          note = " (missing an object assumption for the list " +
                 type_text(a.type) + ")";
        continue;
      }
      if (dec.status == Decrement::Status::Ok) expected.add(subj, *dec.type);
      if (expected == d.premises[0].env) {
        matched = true;
        break;
      }
      if (note.empty()) note = env_diff_note(expected, d.premises[0].env);
    }
    if (!matched)
      return bad("no assumption for " + n.subject.text + " supports this output" + note);
  } else if (r == "tPar") {
    if (auto e = premise_count(2)) return e;
    if (!holds<ParP>(d.process)) return bad("process is not a parallel composition");
    const auto& n = get<ParP>(d.process);
    if (!alpha_eq(d.premises[0].process, n.left) ||
        !alpha_eq(d.premises[1].process, n.right))
      return bad("premise processes must be the two components");
    TypeEnv joined = TypeEnv::union_of(d.premises[0].env, d.premises[1].env);
    if (!(joined == d.env))
      return bad("environment must be the premise union" +
                 env_diff_note(joined, d.env));
  } else if (r == "tIf") {
    if (auto e = premise_count(2)) return e;
    if (!holds<MatchP>(d.process)) return bad("process is not a match");
    const auto& n = get<MatchP>(d.process);
    if (!alpha_eq(d.premises[0].process, n.then_branch) ||
        !alpha_eq(d.premises[1].process, n.else_branch))
      return bad("premise processes must be the two branches");
    for (const Ident& side : {n.left, n.right}) {
      bool found = false;
      for (const auto& a : d.env.items())
        if (a.subject == subject_of(side) && is_chan(a.type)) found = true;
      if (!found) return bad("no channel assumption for " + side.text);
    }
    if (!(d.premises[0].env == d.env) || !(d.premises[1].env == d.env))
      return bad("both branches must keep the environment");
  } else if (r == "tRec") {
    if (auto e = premise_count(1)) return e;
    if (!holds<RecP>(d.process)) return bad("process is not a recursion");
    const auto& n = get<RecP>(d.process);
    if (!same_process(n.body)) return bad("premise process must be the body");
    for (const auto& a : d.env.items())
      if (!is_chan(a.type) || !(a.type.attr == unr()))
        return bad("environment must hold only unrestricted channels, found " +
                   type_text(a.type));
    if (d.env.has_subject(pvar_subject(n.binder)))
      return bad("recursion binder " + n.binder + " is not fresh");
    TypeEnv expected = d.env;
    expected.add(pvar_subject(n.binder), Type::proc());
    if (!(expected == d.premises[0].env))
      return bad("premise must add " + n.binder + ":proc" +
                 env_diff_note(expected, d.premises[0].env));
  } else if (r == "tAll") {
    if (auto e = premise_count(1)) return e;
    if (!holds<AllocP>(d.process)) return bad("process is not an alloc");
    const auto& n = get<AllocP>(d.process);
    if (!same_process(n.body)) return bad("premise process must be the body");
    if (d.env.has_subject(var_subject(n.binder)))
      return bad("alloc binder " + n.binder + " is not fresh");
    TypeEnv gained = TypeEnv::diff(d.premises[0].env, d.env);
    TypeEnv lost = TypeEnv::diff(d.env, d.premises[0].env);
    if (!lost.empty() || gained.size() != 1)
      return bad("premise must add exactly one assumption for " + n.binder);
    const Assumption& a = gained.items()[0];
    if (!(a.subject == var_subject(n.binder)) || !is_chan(a.type) ||
        !(a.type.attr == unq(0)))
      return bad("the new assumption must give " + n.binder +
                 " a unique channel type at index 0");
  } else if (r == "tFree") {
    if (auto e = premise_count(1)) return e;
    if (!holds<FreeP>(d.process)) return bad("process is not a free");
    const auto& n = get<FreeP>(d.process);
    if (!same_process(n.cont))
      return bad("premise process must be the continuation");
    TypeEnv lost = TypeEnv::diff(d.env, d.premises[0].env);
    TypeEnv gained = TypeEnv::diff(d.premises[0].env, d.env);
    if (!gained.empty() || lost.size() != 1)
      return bad("conclusion must hold exactly one extra assumption for " +
                 n.subject.text);
    const Assumption& a = lost.items()[0];
    if (!(a.subject == subject_of(n.subject)) || !is_chan(a.type) ||
        !(a.type.attr == unq(0)))
      return bad("freeing needs a unique assumption at index 0 for " +
                 n.subject.text);
  } else if (r == "tRst1") {
    if (auto e = premise_count(1)) return e;
    if (!holds<ScopeP>(d.process)) return bad("process is not a restriction");
    const auto& n = get<ScopeP>(d.process);
    if (n.state != ChannelState::Allocated)
      return bad("restriction must carry the allocated state");
    if (!same_process(n.body)) return bad("premise process must be the body");
    if (d.env.has_subject(name_subject(n.name)))
      return bad("restricted name " + n.name + " is not fresh");
    TypeEnv gained = TypeEnv::diff(d.premises[0].env, d.env);
    TypeEnv lost = TypeEnv::diff(d.env, d.premises[0].env);
    if (!lost.empty() || gained.size() != 1)
      return bad("premise must add exactly one assumption for " + n.name);
    const Assumption& a = gained.items()[0];
    if (!(a.subject == name_subject(n.name)) || !is_chan(a.type))
      return bad("the new assumption must type " + n.name + " as a channel");
  } else if (r == "tRst2") {
    if (auto e = premise_count(1)) return e;
    if (!holds<ScopeP>(d.process)) return bad("process is not a restriction");
    const auto& n = get<ScopeP>(d.process);
    if (n.state != ChannelState::Deallocated)
      return bad("restriction must carry the deallocated state");
    if (!same_process(n.body)) return bad("premise process must be the body");
    if (d.env.has_subject(name_subject(n.name)))
      return bad("restricted name " + n.name + " is not fresh");
    if (!(d.premises[0].env == d.env))
      return bad("premise must keep the environment" +
                 env_diff_note(d.env, d.premises[0].env));
  } else if (r == "tWeak") {
    if (auto e = premise_count(1)) return e;
    if (!same_process(d.process)) return bad("premise process must not change");
    TypeEnv lost = TypeEnv::diff(d.env, d.premises[0].env);
    TypeEnv gained = TypeEnv::diff(d.premises[0].env, d.env);
    if (!gained.empty() || lost.size() != 1)
      return bad("must drop exactly one assumption" +
                 env_diff_note(d.premises[0].env, d.env));
  } else if (r == "tCon") {
    if (auto e = premise_count(1)) return e;
    if (!same_process(d.process)) return bad("premise process must not change");
    bool matched = false;
    for (const auto& a : d.env.items()) {
      for (const auto& [t1, t2] : split(a.type)) {
        TypeEnv expected = d.env;
        expected.remove_one(a.subject, a.type);
        expected.add(a.subject, t1);
        expected.add(a.subject, t2);
        if (expected == d.premises[0].env) {
          matched = true;
          break;
        }
      }
      if (matched) break;
    }
    if (!matched)
      return bad("premise is not a one-step split of the conclusion" +
                 env_diff_note(d.env, d.premises[0].env));
  } else if (r == "tSub") {
    if (auto e = premise_count(1)) return e;
    if (!same_process(d.process)) return bad("premise process must not change");
    TypeEnv lost = TypeEnv::diff(d.env, d.premises[0].env);
    TypeEnv gained = TypeEnv::diff(d.premises[0].env, d.env);
    if (lost.empty() && gained.empty()) {
      // reflexive use, fine
    } else if (lost.size() == 1 && gained.size() == 1 &&
               lost.items()[0].subject == gained.items()[0].subject &&
               subtype(lost.items()[0].type, gained.items()[0].type)) {
      // held type is a subtype of what the premise assumes
    } else {
      return bad("premise must replace one assumption by a supertype" +
                 env_diff_note(d.premises[0].env, d.env));
    }
  } else if (r == "tRev") {
    if (auto e = premise_count(1)) return e;
    if (!same_process(d.process)) return bad("premise process must not change");
    TypeEnv lost = TypeEnv::diff(d.env, d.premises[0].env);
    TypeEnv gained = TypeEnv::diff(d.premises[0].env, d.env);
    if (lost.empty() && gained.empty()) {
      // trivial revision, fine
    } else if (lost.size() == 1 && gained.size() == 1 &&
               lost.items()[0].subject == gained.items()[0].subject &&
               is_chan(lost.items()[0].type) && is_chan(gained.items()[0].type) &&
               lost.items()[0].type.attr == unq(0) &&
               gained.items()[0].type.attr == unq(0)) {
      // object list revised at index 0
    } else {
      return bad("revision must swap one object list at unique index 0" +
                 env_diff_note(d.premises[0].env, d.env));
    }
  } else if (r == "tConf") {
    return bad("only valid at the root of a derivation");
  } else {
    return bad("unknown rule");
  }

  for (size_t i = 0; i < d.premises.size(); ++i)
    if (auto e = check_node(d.premises[i], join_path(path, i))) return e;
  return std::nullopt;
}

}  // namespace

ValidationResult validate(const Derivation& d) {
  std::optional<NodeError> err;
  if (d.rule == "tConf") {
    auto bad = [&](std::string msg) {
      return NodeError{"", "tConf: " + std::move(msg)};
    };
    if (d.premises.size() != 1) {
      err = bad("needs 1 premise");
    } else if (!d.env.is_partial_map()) {
      err = bad("assumptions must form a partial map");
    } else if (!(d.premises[0].env == d.env)) {
      err = bad("premise must keep the environment" +
                env_diff_note(d.env, d.premises[0].env));
    } else if (!alpha_eq(d.premises[0].process, d.process)) {
      err = bad("premise process must be the configuration process");
    } else {
      for (const auto& a : d.env.items()) {
        if (a.subject.kind != SubjectKind::Name) continue;
        auto it = d.store.find(a.subject.text);
        if (it == d.store.end() || it->second != ChannelState::Allocated) {
          err = bad("channel " + a.subject.text + " is not allocated in the store");
          break;
        }
      }
      if (!err)
        for (const auto& n : free_names(d.process))
          if (!d.store.count(n)) {
            err = bad("free name " + n + " is outside the store");
            break;
          }
    }
    if (!err) err = check_node(d.premises[0], "0");
  } else {
    err = check_node(d, "");
  }
  if (err) return {false, err->path, err->message};
  return {true, "", ""};
}

// ---------------------------------------------------------------------------
// inference

namespace {

struct CacheEntry {
  InferStatus status = InferStatus::NotTypable;
  std::shared_ptr<const Derivation> derivation;
};

using Memo = std::unordered_map<std::string, CacheEntry>;

struct Ctx {
  long budget = 0;
  int max_index = 8;
  std::vector<std::vector<Type>> pool;
  std::string pool_key;
  Memo* memo = nullptr;
  bool exhausted = false;
  int depth = 0;
  int fail_depth = -1;
  std::string fail_note;
};

void note_fail(Ctx& c, const TypeEnv& env, const ProcPtr& p, const std::string& why) {
  if (c.depth >= c.fail_depth) {
    c.fail_depth = c.depth;
    c.fail_note = why + " in {" + render_env(env) + "} |- " + pretty_process(p);
  }
}

bool spend(Ctx& c) {
  if (c.exhausted) return false;
  if (c.budget-- <= 0) {
    c.exhausted = true;
    return false;
  }
  return true;
}

// A structural step taken above the logical rule; `before` is the judgment
// environment where the step fires.
struct Move {
  std::string rule;
  TypeEnv before;
};

Derivation wrap_moves(const std::vector<Move>& moves, Derivation inner) {
  for (size_t i = moves.size(); i-- > 0;) {
    Derivation node{moves[i].rule, moves[i].before, inner.process, {}, {}};
    node.premises.push_back(std::move(inner));
    inner = std::move(node);
  }
  return inner;
}

Derivation weaken_to(const TypeEnv& env, const TypeEnv& target, Derivation leaf) {
  std::vector<Move> moves;
  TypeEnv cur = env;
  TypeEnv extra = TypeEnv::diff(env, target);
  for (const auto& a : extra.items()) {
    moves.push_back({"tWeak", cur});
    cur.remove_one(a.subject, a.type);
  }
  return wrap_moves(moves, std::move(leaf));
}

int available(const TypeEnv& env, const std::vector<Assumption>& reserved,
              const Subject& s, const Type& t) {
  int count = 0;
  for (const auto& tt : env.types_of(s))
    if (tt == t) ++count;
  for (const auto& r : reserved)
    if (r.subject == s && r.type == t) --count;
  return count;
}

// Occurrence count of an identifier in subject, object, match or free
// position. Binders are assumed fresh, so plain matching is enough.
int occurrences(const ProcPtr& p, const Ident& id) {
  int n = 0;
  std::vector<ProcPtr> stack{p};
  while (!stack.empty()) {
    ProcPtr q = stack.back();
    stack.pop_back();
    if (holds<OutputP>(q)) {
      const auto& x = get<OutputP>(q);
      if (x.subject == id) ++n;
      for (const auto& o : x.objects)
        if (o == id) ++n;
      stack.push_back(x.cont);
    } else if (holds<InputP>(q)) {
      const auto& x = get<InputP>(q);
      if (x.subject == id) ++n;
      stack.push_back(x.cont);
    } else if (holds<MatchP>(q)) {
      const auto& x = get<MatchP>(q);
      if (x.left == id) ++n;
      if (x.right == id) ++n;
      stack.push_back(x.then_branch);
      stack.push_back(x.else_branch);
    } else if (holds<RecP>(q)) {
      stack.push_back(get<RecP>(q).body);
    } else if (holds<ParP>(q)) {
      stack.push_back(get<ParP>(q).left);
      stack.push_back(get<ParP>(q).right);
    } else if (holds<ScopeP>(q)) {
      stack.push_back(get<ScopeP>(q).body);
    } else if (holds<AllocP>(q)) {
      stack.push_back(get<AllocP>(q).body);
    } else if (holds<FreeP>(q)) {
      const auto& x = get<FreeP>(q);
      if (x.subject == id) ++n;
      stack.push_back(x.cont);
    }
  }
  return n;
}

bool subject_used(const ProcPtr& p, const Subject& s) {
  switch (s.kind) {
    case SubjectKind::Name:
      return free_names(p).count(s.text) > 0;
    case SubjectKind::Var:
      return free_vars(p).count(s.text) > 0;
    case SubjectKind::ProcVar:
      return free_procvars(p).count(s.text) > 0;
  }
  return false;
}

Ident subject_ident(const Subject& s) {
  return s.kind == SubjectKind::Name ? name(s.text) : var(s.text);
}

// Arities at which an identifier appears in subject position; used to filter
// revision candidates when the demanded object list is not known.
std::set<size_t> subject_arities(const ProcPtr& p, const Ident& id) {
  std::set<size_t> out;
  std::vector<ProcPtr> stack{p};
  while (!stack.empty()) {
    ProcPtr q = stack.back();
    stack.pop_back();
    if (holds<OutputP>(q)) {
      const auto& x = get<OutputP>(q);
      if (x.subject == id) out.insert(x.objects.size());
      stack.push_back(x.cont);
    } else if (holds<InputP>(q)) {
      const auto& x = get<InputP>(q);
      if (x.subject == id) out.insert(x.params.size());
      stack.push_back(x.cont);
    } else if (holds<MatchP>(q)) {
      stack.push_back(get<MatchP>(q).then_branch);
      stack.push_back(get<MatchP>(q).else_branch);
    } else if (holds<RecP>(q)) {
      stack.push_back(get<RecP>(q).body);
    } else if (holds<ParP>(q)) {
      stack.push_back(get<ParP>(q).left);
      stack.push_back(get<ParP>(q).right);
    } else if (holds<ScopeP>(q)) {
      stack.push_back(get<ScopeP>(q).body);
    } else if (holds<AllocP>(q)) {
      stack.push_back(get<AllocP>(q).body);
    } else if (holds<FreeP>(q)) {
      stack.push_back(get<FreeP>(q).cont);
    }
  }
  return out;
}

bool used_as_object(const ProcPtr& p, const Ident& id) {
  std::vector<ProcPtr> stack{p};
  while (!stack.empty()) {
    ProcPtr q = stack.back();
    stack.pop_back();
    if (holds<OutputP>(q)) {
      const auto& x = get<OutputP>(q);
      for (const auto& o : x.objects)
        if (o == id) return true;
      stack.push_back(x.cont);
    } else if (holds<InputP>(q)) {
      stack.push_back(get<InputP>(q).cont);
    } else if (holds<MatchP>(q)) {
      stack.push_back(get<MatchP>(q).then_branch);
      stack.push_back(get<MatchP>(q).else_branch);
    } else if (holds<RecP>(q)) {
      stack.push_back(get<RecP>(q).body);
    } else if (holds<ParP>(q)) {
      stack.push_back(get<ParP>(q).left);
      stack.push_back(get<ParP>(q).right);
    } else if (holds<ScopeP>(q)) {
      stack.push_back(get<ScopeP>(q).body);
    } else if (holds<AllocP>(q)) {
      stack.push_back(get<AllocP>(q).body);
    } else if (holds<FreeP>(q)) {
      stack.push_back(get<FreeP>(q).cont);
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// plans for using one assumption at a prefix

struct SubjectPlan {
  std::vector<Move> moves;
  TypeEnv at_rule;          // env when the prefix rule fires
  Type used;                // the subject assumption consumed by the rule
  std::optional<Type> dec;  // what the premise keeps for the subject
};

std::vector<SubjectPlan> subject_plans(const Ctx& c, const TypeEnv& env,
                                       const Subject& subj, size_t arity) {
  std::vector<SubjectPlan> out;
  std::set<std::string> seen_assumptions, emitted;
  auto emit = [&](std::vector<Move> moves, TypeEnv at_rule, const Type& used) {
    Decrement dec = decrement(used);
    if (dec.status == Decrement::Status::Undefined) return;
    std::string fp = at_rule.key() + "#" + type_text(used);
    if (!emitted.insert(fp).second) return;
    SubjectPlan plan;
    plan.moves = std::move(moves);
    plan.at_rule = std::move(at_rule);
    plan.used = used;
    if (dec.status == Decrement::Status::Ok) plan.dec = *dec.type;
    out.push_back(std::move(plan));
  };

  for (const auto& a : env.items()) {
    if (!(a.subject == subj) || !is_chan(a.type)) continue;
    if (!seen_assumptions.insert(type_text(a.type)).second) continue;

    std::vector<std::pair<std::vector<Move>, Type>> starts;
    starts.push_back({{}, a.type});
    if (a.type.attr == unq(0)) {
      for (const auto& list : c.pool) {
        if (list.size() != arity || list == a.type.objects) continue;
        starts.push_back({{{"tRev", env}}, Type::chan(list, unq(0))});
      }
    }

    for (const auto& [prefix, t] : starts) {
      TypeEnv cur = env;
      if (!prefix.empty()) {
        cur.remove_one(subj, a.type);
        cur.add(subj, t);
      }
      // use the assumption as it stands
      if (t.objects.size() == arity) emit(prefix, cur, t);
      // split once and use one of the pieces
      for (const auto& [t1, t2] : split(t)) {
        if (t1.attr.kind == AttrKind::Unique && t1.attr.index > c.max_index) continue;
        if (t2.attr.kind == AttrKind::Unique && t2.attr.index > c.max_index) continue;
        if (t1.objects.size() != arity) continue;
        TypeEnv after = cur;
        after.remove_one(subj, t);
        after.add(subj, t1);
        after.add(subj, t2);
        auto moves = prefix;
        moves.push_back({"tCon", cur});
        emit(moves, after, t1);
        emit(moves, after, t2);
      }
      // move up the subtype order to something usable
      std::vector<Attr> targets;
      if (t.attr.kind == AttrKind::Unique) {
        if (t.attr.index == 0) targets = {unq(1), unr()};
        else targets = {unr()};
      }
      if (t.objects.size() == arity) {
        for (const auto& attr : targets) {
          Type t2 = Type::chan(t.objects, attr);
          TypeEnv after = cur;
          after.remove_one(subj, t);
          after.add(subj, t2);
          auto moves = prefix;
          moves.push_back({"tSub", cur});
          emit(moves, after, t2);
        }
      }
    }
  }
  return out;
}

struct ObjectPlan {
  std::vector<Move> moves;
  TypeEnv after;  // demanded piece still present; the rule removes it
};

std::vector<ObjectPlan> object_plans(const Ctx& c, const TypeEnv& env,
                                     const Subject& osubj, const Type& demand,
                                     const std::vector<Assumption>& reserved) {
  std::vector<ObjectPlan> out;
  std::set<std::string> seen_assumptions, emitted;
  auto emit = [&](std::vector<Move> moves, TypeEnv after) {
    if (available(after, reserved, osubj, demand) < 1) return;
    if (!emitted.insert(after.key()).second) return;
    out.push_back({std::move(moves), std::move(after)});
  };

  for (const auto& a : env.items()) {
    if (!(a.subject == osubj)) continue;
    if (!seen_assumptions.insert(type_text(a.type)).second) continue;
    if (available(env, reserved, osubj, a.type) < 1) continue;

    std::vector<std::pair<std::vector<Move>, Type>> starts;
    starts.push_back({{}, a.type});
    if (is_chan(a.type) && a.type.attr == unq(0) && is_chan(demand) &&
        a.type.objects != demand.objects)
      starts.push_back({{{"tRev", env}}, Type::chan(demand.objects, unq(0))});

    for (const auto& [prefix, t] : starts) {
      TypeEnv cur = env;
      if (!prefix.empty()) {
        cur.remove_one(osubj, a.type);
        cur.add(osubj, t);
      }
      // consuming the assumption outright is not the only option even on an
      // exact match: a split may leave a copy for the continuation
      if (t == demand) emit(prefix, cur);
      for (const auto& [t1, t2] : split(t)) {
        if (t1.attr.kind == AttrKind::Unique && t1.attr.index > c.max_index) continue;
        if (t2.attr.kind == AttrKind::Unique && t2.attr.index > c.max_index) continue;
        TypeEnv after = cur;
        after.remove_one(osubj, t);
        after.add(osubj, t1);
        after.add(osubj, t2);
        auto moves = prefix;
        moves.push_back({"tCon", cur});
        if (t1 == demand || t2 == demand) {
          emit(moves, after);
          continue;
        }
        for (const Type& piece : {t1, t2}) {
          if (!subtype(piece, demand)) continue;
          TypeEnv subbed = after;
          subbed.remove_one(osubj, piece);
          subbed.add(osubj, demand);
          auto moves2 = moves;
          moves2.push_back({"tSub", after});
          emit(moves2, subbed);
          break;
        }
      }
      if (subtype(t, demand)) {
        TypeEnv after = cur;
        after.remove_one(osubj, t);
        after.add(osubj, demand);
        auto moves = prefix;
        moves.push_back({"tSub", cur});
        emit(moves, after);
      }
    }
  }
  return out;
}

std::optional<Derivation> go(Ctx& c, const TypeEnv& env, const ProcPtr& p);

std::optional<Derivation> try_output(Ctx& c, const TypeEnv& env, const ProcPtr& p) {
  const auto& n = get<OutputP>(p);
  for (auto& sp : subject_plans(c, env, subject_of(n.subject), n.objects.size())) {
    std::vector<Assumption> reserved{{subject_of(n.subject), sp.used}};
    // consume the objects left to right, then type the continuation
    std::function<std::optional<Derivation>(size_t, const TypeEnv&,
                                            std::vector<Move>)>
        step = [&](size_t k, const TypeEnv& cur,
                   std::vector<Move> moves) -> std::optional<Derivation> {
      if (c.exhausted) return std::nullopt;
      if (k == n.objects.size()) {
        TypeEnv premise = cur;
        premise.remove_one(subject_of(n.subject), sp.used);
        for (size_t i = 0; i < n.objects.size(); ++i)
          premise.remove_one(subject_of(n.objects[i]), sp.used.objects[i]);
        if (sp.dec) premise.add(subject_of(n.subject), *sp.dec);
        auto sub = go(c, premise, n.cont);
        if (!sub) return std::nullopt;
        Derivation node{"tOut", cur, p, {}, {}};
        node.premises.push_back(std::move(*sub));
        return wrap_moves(moves, std::move(node));
      }
      const Type& demand = sp.used.objects[k];
      Subject osubj = subject_of(n.objects[k]);
      for (auto& op : object_plans(c, cur, osubj, demand, reserved)) {
        reserved.push_back({osubj, demand});
        auto moves2 = moves;
        moves2.insert(moves2.end(), op.moves.begin(), op.moves.end());
        auto r = step(k + 1, op.after, std::move(moves2));
        reserved.pop_back();
        if (r) return r;
      }
      return std::nullopt;
    };
    auto r = step(0, sp.at_rule, sp.moves);
    if (r) return r;
  }
  note_fail(c, env, p, "no assumption supports the output on " + n.subject.text);
  return std::nullopt;
}

std::optional<Derivation> try_input(Ctx& c, const TypeEnv& env, const ProcPtr& p) {
  const auto& n = get<InputP>(p);
  for (const auto& x : n.params)
    if (env.has_subject(var_subject(x))) {
      note_fail(c, env, p, "input parameter " + x + " shadows an assumption");
      return std::nullopt;
    }
  for (auto& sp : subject_plans(c, env, subject_of(n.subject), n.params.size())) {
    TypeEnv premise = sp.at_rule;
    premise.remove_one(subject_of(n.subject), sp.used);
    if (sp.dec) premise.add(subject_of(n.subject), *sp.dec);
    for (size_t i = 0; i < n.params.size(); ++i)
      premise.add(var_subject(n.params[i]), sp.used.objects[i]);
    auto sub = go(c, premise, n.cont);
    if (!sub) continue;
    Derivation node{"tIn", sp.at_rule, p, {}, {}};
    node.premises.push_back(std::move(*sub));
    return wrap_moves(sp.moves, std::move(node));
  }
  note_fail(c, env, p, "no assumption supports the input on " + n.subject.text);
  return std::nullopt;
}

// How one assumption travels through a parallel split.
struct ParOpt {
  std::optional<std::vector<Type>> rev_list;
  int dir = 0;          // 0 left, 1 right (whole assumption, no split)
  int splits = 0;       // pUnq steps; 0 with copy_both for pUnr/pProc
  int affs_left = 0;
  bool unq_left = false;
  bool copy_both = false;
  bool sub_first = false;  // rework to unrestricted before copying
};

std::optional<Derivation> try_par(Ctx& c, const TypeEnv& env, const ProcPtr& p) {
  const auto& n = get<ParP>(p);

  std::vector<std::vector<ParOpt>> options;
  for (const auto& a : env.items()) {
    std::vector<ParOpt> opts;
    bool used_l = subject_used(n.left, a.subject);
    bool used_r = subject_used(n.right, a.subject);
    if (!used_l && used_r) {
      opts.push_back({std::nullopt, 1, 0, 0, false, false});
    } else if (!used_r) {
      // unused anywhere also lands left and is weakened there
      opts.push_back({std::nullopt, 0, 0, 0, false, false});
    } else {
      // needed on both sides
      if (!is_chan(a.type) || a.type.attr == unr()) {
        opts.push_back({std::nullopt, 0, 0, 0, false, true});
      } else if (a.type.attr == aff()) {
        opts.push_back({std::nullopt, 0, 0, 0, false, false});
        opts.push_back({std::nullopt, 1, 0, 0, false, false});
      } else {
        // unique: another assumption for the same subject may cover one side,
        // so the whole thing going either way stays on the table
        opts.push_back({std::nullopt, 0, 0, 0, false, false});
        opts.push_back({std::nullopt, 1, 0, 0, false, false});
        // or rework it to unrestricted and copy it
        opts.push_back({std::nullopt, 0, 0, 0, false, true, true});
        // or peel affine copies off the index
        std::vector<std::optional<std::vector<Type>>> revs{std::nullopt};
        if (a.type.attr == unq(0)) {
          Ident id = subject_ident(a.subject);
          auto arities = subject_arities(p, id);
          bool object_use = used_as_object(p, id);
          for (const auto& list : c.pool) {
            if (list == a.type.objects) continue;
            if (!object_use && !arities.count(list.size())) continue;
            revs.push_back(list);
          }
        }
        for (const auto& rev : revs) {
          for (bool uleft : {true, false})
            opts.push_back({rev, 0, 1, uleft ? 0 : 1, uleft, false});
          if (!rev) {
            int i = a.type.attr.index;
            if (i + 2 <= c.max_index)
              for (int al = 0; al <= 2; ++al)
                for (bool uleft : {true, false}) {
                  int ar = 2 - al;
                  bool left_empty = al == 0 && !uleft;
                  bool right_empty = ar == 0 && uleft;
                  if (left_empty || right_empty) continue;
                  opts.push_back({std::nullopt, 0, 2, al, uleft, false});
                }
          }
        }
      }
    }
    options.push_back(std::move(opts));
  }

  const auto& items = env.items();
  std::optional<Derivation> found;

  std::function<void(size_t, TypeEnv, std::vector<Move>, TypeEnv, TypeEnv)> dfs =
      [&](size_t i, TypeEnv now, std::vector<Move> moves, TypeEnv envl,
          TypeEnv envr) {
        if (found || c.exhausted) return;
        if (i == items.size()) {
          auto left = go(c, envl, n.left);
          if (!left) return;
          auto right = go(c, envr, n.right);
          if (!right) return;
          Derivation node{"tPar", now, p, {}, {}};
          node.premises.push_back(std::move(*left));
          node.premises.push_back(std::move(*right));
          found = wrap_moves(moves, std::move(node));
          return;
        }
        const Assumption& a = items[i];
        for (const auto& o : options[i]) {
          TypeEnv cur = now;
          auto mv = moves;
          TypeEnv l = envl, r = envr;
          Type t = a.type;
          if (o.rev_list) {
            mv.push_back({"tRev", cur});
            Type revd = Type::chan(*o.rev_list, unq(0));
            cur.remove_one(a.subject, t);
            cur.add(a.subject, revd);
            t = revd;
          }
          if (o.sub_first) {
            Type t2 = Type::chan(t.objects, unr());
            if (!subtype(t, t2)) continue;
            mv.push_back({"tSub", cur});
            cur.remove_one(a.subject, t);
            cur.add(a.subject, t2);
            t = t2;
          }
          if (o.copy_both) {
            auto pieces = split(t);
            if (pieces.empty()) continue;
            mv.push_back({"tCon", cur});
            cur.remove_one(a.subject, t);
            cur.add(a.subject, pieces[0].first);
            cur.add(a.subject, pieces[0].second);
            l.add(a.subject, pieces[0].first);
            r.add(a.subject, pieces[0].second);
          } else if (o.splits == 0) {
            (o.dir == 0 ? l : r).add(a.subject, t);
          } else {
            bool ok = true;
            Type rest = t;
            for (int s = 0; s < o.splits; ++s) {
              auto pieces = split(rest);
              if (pieces.empty()) {
                ok = false;
                break;
              }
              mv.push_back({"tCon", cur});
              cur.remove_one(a.subject, rest);
              cur.add(a.subject, pieces[0].first);
              cur.add(a.subject, pieces[0].second);
              (s < o.affs_left ? l : r).add(a.subject, pieces[0].first);
              rest = pieces[0].second;
            }
            if (!ok) continue;
            (o.unq_left ? l : r).add(a.subject, rest);
          }
          dfs(i + 1, std::move(cur), std::move(mv), std::move(l), std::move(r));
          if (found || c.exhausted) return;
        }
      };
  dfs(0, env, {}, TypeEnv{}, TypeEnv{});
  if (!found)
    note_fail(c, env, p, "no distribution of the assumptions types both sides");
  return found;
}

std::optional<Derivation> try_rec(Ctx& c, const TypeEnv& env, const ProcPtr& p) {
  const auto& n = get<RecP>(p);
  if (env.has_subject(pvar_subject(n.binder))) {
    note_fail(c, env, p, "recursion binder " + n.binder + " shadows an assumption");
    return std::nullopt;
  }

  // per assumption: keep it unrestricted, rework it to unrestricted, or drop it
  struct RecOpt {
    std::optional<std::vector<Type>> rev_list;
    bool drop = false;
    bool sub = false;
  };
  const auto& items = env.items();
  std::vector<std::vector<RecOpt>> options;
  for (const auto& a : items) {
    std::vector<RecOpt> opts;
    if (is_chan(a.type) && a.type.attr == unr()) {
      opts.push_back({std::nullopt, false, false});  // already fine
    } else if (is_chan(a.type) && a.type.attr.kind == AttrKind::Unique) {
      opts.push_back({std::nullopt, false, true});
      if (a.type.attr == unq(0)) {
        Ident id = subject_ident(a.subject);
        auto arities = subject_arities(n.body, id);
        bool object_use = used_as_object(n.body, id);
        for (const auto& list : c.pool) {
          if (list == a.type.objects) continue;
          if (!object_use && !arities.count(list.size())) continue;
          opts.push_back({list, false, true});
        }
      }
      opts.push_back({std::nullopt, true, false});
    } else {
      opts.push_back({std::nullopt, true, false});
    }
    options.push_back(std::move(opts));
  }

  std::optional<Derivation> found;
  std::function<void(size_t, TypeEnv, std::vector<Move>)> dfs =
      [&](size_t i, TypeEnv now, std::vector<Move> moves) {
        if (found || c.exhausted) return;
        if (i == items.size()) {
          TypeEnv premise = now;
          premise.add(pvar_subject(n.binder), Type::proc());
          auto body = go(c, premise, n.body);
          if (!body) return;
          Derivation node{"tRec", now, p, {}, {}};
          node.premises.push_back(std::move(*body));
          found = wrap_moves(moves, std::move(node));
          return;
        }
        const Assumption& a = items[i];
        for (const auto& o : options[i]) {
          TypeEnv cur = now;
          auto mv = moves;
          Type t = a.type;
          if (o.rev_list) {
            mv.push_back({"tRev", cur});
            Type revd = Type::chan(*o.rev_list, unq(0));
            cur.remove_one(a.subject, t);
            cur.add(a.subject, revd);
            t = revd;
          }
          if (o.drop) {
            mv.push_back({"tWeak", cur});
            cur.remove_one(a.subject, t);
          } else if (o.sub) {
            Type t2 = Type::chan(t.objects, unr());
            if (!subtype(t, t2)) continue;
            mv.push_back({"tSub", cur});
            cur.remove_one(a.subject, t);
            cur.add(a.subject, t2);
          }
          dfs(i + 1, std::move(cur), std::move(mv));
          if (found || c.exhausted) return;
        }
      };
  dfs(0, env, {});
  if (!found)
    note_fail(c, env, p, "assumptions cannot be made unrestricted for rec " + n.binder);
  return found;
}

std::optional<Derivation> go_uncached(Ctx& c, const TypeEnv& env, const ProcPtr& p) {
  if (holds<NilP>(p)) {
    Derivation leaf{"tNil", TypeEnv{}, p, {}, {}};
    return weaken_to(env, TypeEnv{}, std::move(leaf));
  }
  if (holds<PVarP>(p)) {
    const auto& n = get<PVarP>(p);
    TypeEnv target;
    target.add(pvar_subject(n.label), Type::proc());
    if (!env.contains(pvar_subject(n.label), Type::proc())) {
      note_fail(c, env, p, "no proc assumption for " + n.label);
      return std::nullopt;
    }
    Derivation leaf{"tVar", target, p, {}, {}};
    return weaken_to(env, target, std::move(leaf));
  }
  if (holds<OutputP>(p)) return try_output(c, env, p);
  if (holds<InputP>(p)) return try_input(c, env, p);
  if (holds<ParP>(p)) return try_par(c, env, p);
  if (holds<RecP>(p)) return try_rec(c, env, p);
  if (holds<MatchP>(p)) {
    const auto& n = get<MatchP>(p);
    for (const Ident& side : {n.left, n.right}) {
      bool found = false;
      for (const auto& a : env.items())
        if (a.subject == subject_of(side) && is_chan(a.type)) found = true;
      if (!found) {
        note_fail(c, env, p, "no channel assumption for " + side.text);
        return std::nullopt;
      }
    }
    auto tb = go(c, env, n.then_branch);
    if (!tb) return std::nullopt;
    auto eb = go(c, env, n.else_branch);
    if (!eb) return std::nullopt;
    Derivation node{"tIf", env, p, {}, {}};
    node.premises.push_back(std::move(*tb));
    node.premises.push_back(std::move(*eb));
    return node;
  }
  if (holds<AllocP>(p)) {
    const auto& n = get<AllocP>(p);
    if (env.has_subject(var_subject(n.binder))) {
      note_fail(c, env, p, "alloc binder " + n.binder + " shadows an assumption");
      return std::nullopt;
    }
    std::vector<std::vector<Type>> starts{{}};
    for (const auto& list : c.pool)
      if (!list.empty()) starts.push_back(list);
    for (const auto& list : starts) {
      TypeEnv premise = env;
      premise.add(var_subject(n.binder), Type::chan(list, unq(0)));
      auto body = go(c, premise, n.body);
      if (!body) continue;
      Derivation node{"tAll", env, p, {}, {}};
      node.premises.push_back(std::move(*body));
      return node;
    }
    note_fail(c, env, p, "no channel type works for alloc " + n.binder);
    return std::nullopt;
  }
  if (holds<ScopeP>(p)) {
    const auto& n = get<ScopeP>(p);
    if (env.has_subject(name_subject(n.name))) {
      note_fail(c, env, p, "restricted name " + n.name + " shadows an assumption");
      return std::nullopt;
    }
    if (n.state == ChannelState::Deallocated) {
      auto body = go(c, env, n.body);
      if (!body) return std::nullopt;
      Derivation node{"tRst2", env, p, {}, {}};
      node.premises.push_back(std::move(*body));
      return node;
    }
    std::vector<std::vector<Type>> starts{{}};
    for (const auto& list : c.pool)
      if (!list.empty()) starts.push_back(list);
    for (const auto& list : starts) {
      TypeEnv premise = env;
      premise.add(name_subject(n.name), Type::chan(list, unq(0)));
      auto body = go(c, premise, n.body);
      if (!body) continue;
      Derivation node{"tRst1", env, p, {}, {}};
      node.premises.push_back(std::move(*body));
      return node;
    }
    note_fail(c, env, p, "no channel type works for the restriction of " + n.name);
    return std::nullopt;
  }
  if (holds<FreeP>(p)) {
    const auto& n = get<FreeP>(p);
    Subject subj = subject_of(n.subject);
    std::set<std::string> seen;
    for (const auto& a : env.items()) {
      if (!(a.subject == subj) || !is_chan(a.type) || !(a.type.attr == unq(0)))
        continue;
      if (!seen.insert(type_text(a.type)).second) continue;
      TypeEnv rest = env;
      rest.remove_one(subj, a.type);
      auto sub = go(c, rest, n.cont);
      if (!sub) continue;
      Derivation node{"tFree", env, p, {}, {}};
      node.premises.push_back(std::move(*sub));
      return node;
    }
    note_fail(c, env, p, "no unique assumption at index 0 to free " + n.subject.text);
    return std::nullopt;
  }
  note_fail(c, env, p, "unsupported process form");
  return std::nullopt;
}

std::optional<Derivation> go(Ctx& c, const TypeEnv& env, const ProcPtr& p) {
  if (!spend(c)) return std::nullopt;
  std::string key;
  if (c.memo) {
    key = alpha_key(p);
    key += '\x02';
    key += env.key();
    key += '\x02';
    key += c.pool_key;
    auto it = c.memo->find(key);
    if (it != c.memo->end()) {
      if (it->second.status == InferStatus::Found) return *it->second.derivation;
      return std::nullopt;
    }
  }
  ++c.depth;
  auto result = go_uncached(c, env, p);
  --c.depth;
  if (c.memo) {
    if (result)
      (*c.memo)[key] = {InferStatus::Found,
                        std::make_shared<const Derivation>(*result)};
    else if (!c.exhausted)
      (*c.memo)[key] = {InferStatus::NotTypable, nullptr};
  }
  return result;
}

// ---------------------------------------------------------------------------
// binder freshening

struct FreshState {
  std::set<std::string> names, vars, pvars;
  std::vector<std::map<std::string, std::string>> name_sub{{}}, var_sub{{}},
      pvar_sub{{}};
};

std::string freshen_binder(std::set<std::string>& used, const std::string& text) {
  if (!used.count(text)) {
    used.insert(text);
    return text;
  }
  std::string fresh = fresh_name(text, used);
  used.insert(fresh);
  return fresh;
}

ProcPtr freshen_rec(const ProcPtr& p, FreshState& st) {
  auto rename = [&](const Ident& id) -> Ident {
    const auto& sub = id.kind == IdKind::Name ? st.name_sub.back() : st.var_sub.back();
    auto it = sub.find(id.text);
    return it == sub.end() ? id : Ident{id.kind, it->second};
  };
  if (holds<OutputP>(p)) {
    const auto& n = get<OutputP>(p);
    std::vector<Ident> objects;
    for (const auto& o : n.objects) objects.push_back(rename(o));
    return make_output(rename(n.subject), std::move(objects), freshen_rec(n.cont, st));
  }
  if (holds<InputP>(p)) {
    const auto& n = get<InputP>(p);
    Ident subj = rename(n.subject);
    auto saved = st.var_sub.back();
    st.var_sub.push_back(saved);
    std::vector<std::string> params;
    for (const auto& x : n.params) {
      std::string fresh = freshen_binder(st.vars, x);
      if (fresh != x) st.var_sub.back()[x] = fresh;
      else st.var_sub.back().erase(x);
      params.push_back(fresh);
    }
    ProcPtr cont = freshen_rec(n.cont, st);
    st.var_sub.pop_back();
    return make_input(subj, std::move(params), std::move(cont));
  }
  if (holds<NilP>(p)) return p;
  if (holds<MatchP>(p)) {
    const auto& n = get<MatchP>(p);
    return make_match(rename(n.left), rename(n.right), freshen_rec(n.then_branch, st),
                      freshen_rec(n.else_branch, st));
  }
  if (holds<RecP>(p)) {
    const auto& n = get<RecP>(p);
    std::string fresh = freshen_binder(st.pvars, n.binder);
    st.pvar_sub.push_back(st.pvar_sub.back());
    if (fresh != n.binder) st.pvar_sub.back()[n.binder] = fresh;
    else st.pvar_sub.back().erase(n.binder);
    ProcPtr body = freshen_rec(n.body, st);
    st.pvar_sub.pop_back();
    return make_rec(fresh, std::move(body));
  }
  if (holds<PVarP>(p)) {
    const auto& n = get<PVarP>(p);
    auto it = st.pvar_sub.back().find(n.label);
    return it == st.pvar_sub.back().end() ? p : make_pvar(it->second);
  }
  if (holds<ParP>(p)) {
    const auto& n = get<ParP>(p);
    ProcPtr left = freshen_rec(n.left, st);
    return make_par(std::move(left), freshen_rec(n.right, st));
  }
  if (holds<ScopeP>(p)) {
    const auto& n = get<ScopeP>(p);
    std::string fresh = freshen_binder(st.names, n.name);
    st.name_sub.push_back(st.name_sub.back());
    if (fresh != n.name) st.name_sub.back()[n.name] = fresh;
    else st.name_sub.back().erase(n.name);
    ProcPtr body = freshen_rec(n.body, st);
    st.name_sub.pop_back();
    return make_scope(fresh, n.state, std::move(body));
  }
  if (holds<AllocP>(p)) {
    const auto& n = get<AllocP>(p);
    std::string fresh = freshen_binder(st.vars, n.binder);
    st.var_sub.push_back(st.var_sub.back());
    if (fresh != n.binder) st.var_sub.back()[n.binder] = fresh;
    else st.var_sub.back().erase(n.binder);
    ProcPtr body = freshen_rec(n.body, st);
    st.var_sub.pop_back();
    return make_alloc(fresh, std::move(body));
  }
  const auto& n = get<FreeP>(p);
  Ident subj = rename(n.subject);
  return make_free(subj, freshen_rec(n.cont, st));
}

// Renames bound identifiers so every binder is distinct from the assumptions,
// the free identifiers and every other binder.
ProcPtr freshen(const ProcPtr& p, const TypeEnv& env) {
  FreshState st;
  st.names = free_names(p);
  st.vars = free_vars(p);
  st.pvars = free_procvars(p);
  for (const auto& a : env.items()) {
    switch (a.subject.kind) {
      case SubjectKind::Name: st.names.insert(a.subject.text); break;
      case SubjectKind::Var: st.vars.insert(a.subject.text); break;
      case SubjectKind::ProcVar: st.pvars.insert(a.subject.text); break;
    }
  }
  return freshen_rec(p, st);
}

// ---------------------------------------------------------------------------
// the object-list pool searched by revisions and restrictions

void collect_lists(const Type& t, std::set<std::string>& seen,
                   std::vector<std::vector<Type>>& out) {
  if (!is_chan(t)) return;
  std::string key;
  for (const auto& o : t.objects) key += type_text(o) + ";";
  if (seen.insert(key).second) out.push_back(t.objects);
  for (const auto& o : t.objects) collect_lists(o, seen, out);
}

void build_pool(Ctx& c, const TypeEnv& env) {
  std::set<std::string> seen;
  std::vector<std::vector<Type>> base;
  collect_lists(Type::chan({}, unr()), seen, base);  // the empty list first
  for (const auto& a : env.items()) collect_lists(a.type, seen, base);
  c.pool = base;
  // one level of wrapping covers restrictions sent over fresh channels
  for (const auto& list : base) {
    for (const Attr& attr : {unq(0), aff(), unr()}) {
      std::vector<Type> single{Type::chan(list, attr)};
      std::string key = type_text(single[0]) + ";";
      if (seen.insert(key).second) c.pool.push_back(std::move(single));
    }
  }
  c.pool_key.clear();
  for (const auto& list : c.pool) {
    for (const auto& t : list) c.pool_key += type_text(t) + ",";
    c.pool_key += "|";
  }
}

}  // namespace

SearchMemo::SearchMemo() : impl(reinterpret_cast<Impl*>(new Memo())) {}
SearchMemo::~SearchMemo() { delete reinterpret_cast<Memo*>(impl); }

InferResult infer(const TypeEnv& env, const ProcPtr& p, const InferOptions& opts,
                  SearchMemo* memo) {
  Ctx c;
  c.budget = opts.budget;
  c.max_index = opts.max_index;
  build_pool(c, env);
  Memo local;
  c.memo = memo ? reinterpret_cast<Memo*>(memo->impl) : &local;
  ProcPtr q = freshen(p, env);
  auto d = go(c, env, q);
  if (d) return {InferStatus::Found, std::move(*d), ""};
  if (c.exhausted)
    return {InferStatus::Inconclusive, std::nullopt, "search budget exhausted"};
  return {InferStatus::NotTypable, std::nullopt, c.fail_note};
}

InferResult check_config(const TypeEnv& env, const Configuration& c,
                         const InferOptions& opts, SearchMemo* memo) {
  if (!env.is_partial_map())
    return {InferStatus::NotTypable, std::nullopt,
            "assumptions must form a partial map"};
  for (const auto& a : env.items()) {
    if (a.subject.kind != SubjectKind::Name) continue;
    auto it = c.store.find(a.subject.text);
    if (it == c.store.end() || it->second != ChannelState::Allocated)
      return {InferStatus::NotTypable, std::nullopt,
              "channel " + a.subject.text + " is not allocated in the store"};
  }
  for (const auto& nm : free_names(c.process))
    if (!env.has_subject(name_subject(nm)))
      return {InferStatus::NotTypable, std::nullopt,
              "no assumption for the free name " + nm};
  InferResult r = infer(env, c.process, opts, memo);
  if (r.status != InferStatus::Found) return r;
  Derivation conf{"tConf", env, r.derivation->process, c.store, {}};
  conf.premises.push_back(std::move(*r.derivation));
  r.derivation = std::move(conf);
  return r;
}

namespace {

std::string config_text(const Configuration& c) {
  std::string out = "store { ";
  bool first = true;
  for (const auto& [name, state] : c.store) {
    if (!first) out += ", ";
    first = false;
    out += name;
    out += ':';
    out += state_text(state);
  }
  out += " } in ";
  out += pretty_process(c.process);
  return out;
}

}  // namespace

ProbeReport subject_reduction_probe(const TypeEnv& env, const Configuration& c,
                                    int depth, const InferOptions& opts) {
  ProbeReport report;
  SearchMemo memo;
  const size_t state_cap = 200000;

  Configuration start{c.store, canonical_form(c.process)};
  std::set<std::string> visited{config_key(start)};
  std::deque<std::pair<Configuration, int>> queue{{start, 0}};

  while (!queue.empty()) {
    auto [state, d] = std::move(queue.front());
    queue.pop_front();
    ++report.states_checked;

    TypeEnv restricted;
    for (const auto& a : env.items()) {
      if (a.subject.kind == SubjectKind::Name) {
        auto it = state.store.find(a.subject.text);
        if (it == state.store.end() || it->second != ChannelState::Allocated)
          continue;
      }
      restricted.add(a);
    }
    InferResult r = check_config(restricted, state, opts, &memo);
    if (r.status == InferStatus::NotTypable && !(restricted == env))
      r = check_config(env, state, opts, &memo);
    if (r.status == InferStatus::Inconclusive) {
      ++report.inconclusive;
    } else if (r.status == InferStatus::NotTypable) {
      report.falsifications.push_back(config_text(state));
    }

    if (d >= depth) {
      if (!successors(state).empty()) report.truncated = true;
      continue;
    }
    for (auto& s : successors(state)) {
      std::string key = config_key(s.after);
      if (!visited.insert(key).second) continue;
      if (visited.size() > state_cap) {
        report.truncated = true;
        break;
      }
      queue.emplace_back(std::move(s.after), d + 1);
    }
  }
  return report;
}

}  // namespace pir
