#include "pir/types.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace pir {

std::string attr_text(const Attr& a) {
  switch (a.kind) {
    case AttrKind::Affine: return "aff";
    case AttrKind::Unrestricted: return "unr";
    case AttrKind::Unique: return "unq(" + std::to_string(a.index) + ")";
  }
  return "?";
}

std::string type_text(const Type& t) {
  if (t.kind == Type::Kind::Proc) return "proc";
  std::string out = "ch(";
  for (size_t i = 0; i < t.objects.size(); ++i) {
    if (i) out += ", ";
    out += type_text(t.objects[i]);
  }
  out += ")@";
  out += attr_text(t.attr);
  return out;
}

bool type_less(const Type& a, const Type& b) { return type_text(a) < type_text(b); }

Decrement decrement(const Type& t) {
  if (t.kind == Type::Kind::Proc) return {Decrement::Status::Undefined, std::nullopt};
  switch (t.attr.kind) {
    case AttrKind::Affine:
      return {Decrement::Status::Consumed, std::nullopt};
    case AttrKind::Unrestricted:
      return {Decrement::Status::Ok, t};
    case AttrKind::Unique:
      if (t.attr.index == 0) return {Decrement::Status::Undefined, std::nullopt};
      return {Decrement::Status::Ok, Type::chan(t.objects, unq(t.attr.index - 1))};
  }
  return {Decrement::Status::Undefined, std::nullopt};
}

std::vector<std::pair<Type, Type>> split(const Type& t) {
  if (t.kind == Type::Kind::Proc) return {{Type::proc(), Type::proc()}};
  switch (t.attr.kind) {
    case AttrKind::Affine:
      return {};
    case AttrKind::Unrestricted:
      return {{t, t}};
    case AttrKind::Unique:
      return {{Type::chan(t.objects, aff()), Type::chan(t.objects, unq(t.attr.index + 1))}};
  }
  return {};
}

bool attr_subtype(const Attr& a, const Attr& b) {
  if (a == b) return true;
  switch (a.kind) {
    case AttrKind::Affine:
      return false;
    case AttrKind::Unrestricted:
      return b.kind == AttrKind::Affine;
    case AttrKind::Unique:
      if (b.kind == AttrKind::Unique) return a.index <= b.index;
      return true;  // raises through unr up to aff
  }
  return false;
}

bool subtype(const Type& a, const Type& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == Type::Kind::Proc) return true;
  return a.objects == b.objects && attr_subtype(a.attr, b.attr);
}

// ---------------------------------------------------------------------------
// TypeEnv

namespace {

std::string subject_tag(const Subject& s) {
  switch (s.kind) {
    case SubjectKind::Name: return s.text;
    case SubjectKind::Var: return "$" + s.text;
    case SubjectKind::ProcVar: return "%" + s.text;
  }
  return s.text;
}

bool assumption_less(const Assumption& a, const Assumption& b) {
  if (a.subject != b.subject) return a.subject < b.subject;
  return type_less(a.type, b.type);
}

}  // namespace

void TypeEnv::add(Subject s, Type t) {
  Assumption a{std::move(s), std::move(t)};
  auto it = std::upper_bound(items_.begin(), items_.end(), a, assumption_less);
  items_.insert(it, std::move(a));
}

bool TypeEnv::remove_one(const Subject& s, const Type& t) {
  for (auto it = items_.begin(); it != items_.end(); ++it) {
    if (it->subject == s && it->type == t) {
      items_.erase(it);
      return true;
    }
  }
  return false;
}

std::vector<Type> TypeEnv::types_of(const Subject& s) const {
  std::vector<Type> out;
  for (const auto& a : items_)
    if (a.subject == s) out.push_back(a.type);
  return out;
}

bool TypeEnv::has_subject(const Subject& s) const {
  for (const auto& a : items_)
    if (a.subject == s) return true;
  return false;
}

bool TypeEnv::contains(const Subject& s, const Type& t) const {
  for (const auto& a : items_)
    if (a.subject == s && a.type == t) return true;
  return false;
}

bool TypeEnv::is_partial_map() const {
  for (size_t i = 1; i < items_.size(); ++i)
    if (items_[i].subject == items_[i - 1].subject) return false;
  return true;
}

std::string TypeEnv::key() const {
  std::string out;
  for (const auto& a : items_) {
    out += subject_tag(a.subject);
    out += ':';
    out += type_text(a.type);
    out += ',';
  }
  return out;
}

TypeEnv TypeEnv::union_of(const TypeEnv& a, const TypeEnv& b) {
  TypeEnv out = a;
  for (const auto& item : b.items_) out.add(item);
  return out;
}

TypeEnv TypeEnv::diff(const TypeEnv& a, const TypeEnv& b) {
  TypeEnv out = a;
  for (const auto& item : b.items_) out.remove_one(item.subject, item.type);
  return out;
}

// ---------------------------------------------------------------------------
// consistency
//
// Everything an environment can say about one identifier grows out of a
// single origin assumption by contraction (read conclusion to premise),
// subtyping, revision at unq(0), and weakening. Splitting only ever peels
// affine copies off a unique spine, raises never lower an attribute, and
// revision can only happen before the first split, so feasibility per
// identifier reduces to a small shape check on the multiset of attributes.

namespace {

struct Pile {
  // all channel assumptions for one subject
  std::vector<Type> chans;
  int procs = 0;
};

bool shared_objects(const std::vector<Type>& chans, std::vector<Type>* objects) {
  for (size_t i = 1; i < chans.size(); ++i)
    if (chans[i].objects != chans[0].objects) return false;
  if (!chans.empty() && objects) *objects = chans[0].objects;
  return true;
}

void log_move(std::vector<ConsistencyMove>* moves, const std::string& rule,
              const std::string& detail) {
  if (moves) moves->push_back({rule, detail});
}

// Could `pile` have grown out of the single assumption `origin`?
bool pile_from_origin(const Subject& u, const Type& origin,
                      const std::vector<Type>& pile, int procs,
                      std::vector<ConsistencyMove>* moves, std::string* reason) {
  auto fail = [&](const std::string& why) {
    if (reason) *reason = subject_tag(u) + ": " + why;
    return false;
  };
  const std::string tag = subject_tag(u);

  if (origin.kind == Type::Kind::Proc) {
    if (!pile.empty()) return fail("channel assumptions cannot come from proc");
    if (procs == 0) {
      log_move(moves, "tWeak", tag + ": proc dropped");
      return true;
    }
    for (int i = 1; i < procs; ++i) log_move(moves, "tCon", tag + ": proc = proc . proc");
    return true;
  }
  if (procs > 0) return fail("proc assumptions cannot come from a channel type");

  if (pile.empty()) {
    log_move(moves, "tWeak", tag + ": " + type_text(origin) + " dropped");
    return true;
  }

  std::vector<Type> objects;
  if (!shared_objects(pile, &objects)) return fail("object types disagree");

  bool revised = objects != origin.objects;
  if (revised) {
    if (!(origin.attr.kind == AttrKind::Unique && origin.attr.index == 0))
      return fail("object types can only be revised at unq(0)");
    log_move(moves, "tRev", tag + ": objects revised to match environment");
  }

  int affs = 0;
  std::vector<Attr> rest;
  for (const auto& t : pile) {
    if (t.attr.kind == AttrKind::Affine)
      ++affs;
    else
      rest.push_back(t.attr);
  }

  auto chan = [&](Attr a) { return Type::chan(objects, a); };

  switch (origin.attr.kind) {
    case AttrKind::Affine:
      if (pile.size() == 1 && rest.empty()) return true;
      return fail("affine assumptions do not split");
    case AttrKind::Unrestricted: {
      for (const auto& a : rest)
        if (a.kind != AttrKind::Unrestricted)
          return fail("only unr and aff grow out of an unr origin");
      if (revised) return fail("object types can only be revised at unq(0)");
      for (size_t i = 1; i < pile.size(); ++i)
        log_move(moves, "tCon", tag + ": unr = unr . unr");
      for (int i = 0; i < affs; ++i)
        log_move(moves, "tSub", tag + ": unr raised to aff");
      return true;
    }
    case AttrKind::Unique: {
      int i0 = origin.attr.index;
      // k contraction steps peel k affine copies off the spine and leave it
      // at unq(i0 + k); weakening may then delete copies or the spine.
      if (rest.empty()) {
        for (int k = 0; k < affs; ++k)
          log_move(moves, "tCon",
                   tag + ": " + attr_text(unq(i0 + k)) + " = aff . " +
                       attr_text(unq(i0 + k + 1)));
        log_move(moves, "tWeak", tag + ": " + type_text(chan(unq(i0 + affs))) + " dropped");
        return true;
      }
      bool all_unr = true;
      for (const auto& a : rest)
        if (a.kind != AttrKind::Unrestricted) all_unr = false;
      if (all_unr) {
        // once the spine is raised to unr it splits off as many copies as
        // needed, so any mix of unr and aff is reachable
        for (int k = 0; k < affs; ++k)
          log_move(moves, "tCon",
                   tag + ": " + attr_text(unq(i0 + k)) + " = aff . " +
                       attr_text(unq(i0 + k + 1)));
        log_move(moves, "tSub", tag + ": " + attr_text(unq(i0 + affs)) + " raised to unr");
        for (size_t k = 1; k < rest.size(); ++k)
          log_move(moves, "tCon", tag + ": unr = unr . unr");
        return true;
      }
      if (rest.size() > 1) return fail("at most one unique assumption can remain");
      // spine is unq(j)
      int j = rest[0].index;
      if (j < i0 + affs)
        return fail("affine copies exceed what the unique index allows");
      for (int k = 0; k < affs; ++k)
        log_move(moves, "tCon",
                 tag + ": " + attr_text(unq(i0 + k)) + " = aff . " +
                     attr_text(unq(i0 + k + 1)));
      if (j > i0 + affs)
        log_move(moves, "tSub",
                 tag + ": " + attr_text(unq(i0 + affs)) + " raised to " + attr_text(unq(j)));
      return true;
    }
  }
  return fail("unreachable");
}

std::map<Subject, Pile> piles_of(const TypeEnv& env) {
  std::map<Subject, Pile> piles;
  for (const auto& a : env.items()) {
    if (a.type.kind == Type::Kind::Proc)
      piles[a.subject].procs++;
    else
      piles[a.subject].chans.push_back(a.type);
  }
  return piles;
}

}  // namespace

ConsistencyResult is_consistent(const TypeEnv& env) {
  ConsistencyResult result;
  ConsistencyWitness witness;
  for (const auto& [subject, pile] : piles_of(env)) {
    if (pile.procs > 0 && !pile.chans.empty()) {
      result.reason = subject_tag(subject) + ": proc and channel assumptions mix";
      return result;
    }
    if (pile.procs > 0) {
      witness.origin.add(subject, Type::proc());
      if (!pile_from_origin(subject, Type::proc(), {}, pile.procs, &witness.moves,
                            &result.reason))
        return result;
      continue;
    }
    std::vector<Type> objects;
    if (!shared_objects(pile.chans, &objects)) {
      result.reason = subject_tag(subject) + ": object types disagree";
      return result;
    }
    int affs = 0;
    std::vector<Attr> rest;
    for (const auto& t : pile.chans) {
      if (t.attr.kind == AttrKind::Affine)
        ++affs;
      else
        rest.push_back(t.attr);
    }
    bool all_unr = !rest.empty();
    for (const auto& a : rest)
      if (a.kind != AttrKind::Unrestricted) all_unr = false;
    Type origin = Type::proc();
    if (pile.chans.size() == 1) {
      origin = pile.chans[0];
    } else if (rest.empty() || all_unr) {
      origin = Type::chan(objects, unr());
    } else if (rest.size() == 1 && rest[0].kind == AttrKind::Unique) {
      int j = rest[0].index;
      if (j < affs) {
        result.reason = subject_tag(subject) +
                        ": affine copies exceed what the unique index allows";
        return result;
      }
      origin = Type::chan(objects, unq(j - affs));
    } else {
      result.reason = subject_tag(subject) + ": no single origin covers these assumptions";
      return result;
    }
    if (!pile_from_origin(subject, origin, pile.chans, 0, &witness.moves, &result.reason))
      return result;
    witness.origin.add(subject, origin);
  }
  result.consistent = true;
  result.witness = std::move(witness);
  return result;
}

bool consistent_from(const TypeEnv& env, const TypeEnv& origin,
                     std::vector<ConsistencyMove>* moves, std::string* reason) {
  if (!origin.is_partial_map()) {
    if (reason) *reason = "origin is not a partial function";
    return false;
  }
  auto piles = piles_of(env);
  for (const auto& [subject, pile] : piles) {
    auto origin_types = origin.types_of(subject);
    if (origin_types.empty()) {
      if (reason)
        *reason = subject_tag(subject) + ": assumptions with no origin entry";
      return false;
    }
    if (!pile_from_origin(subject, origin_types[0], pile.chans, pile.procs, moves, reason))
      return false;
  }
  // Origin entries for subjects absent from env were weakened away.
  for (const auto& a : origin.items()) {
    if (!piles.count(a.subject))
      log_move(moves, "tWeak", subject_tag(a.subject) + ": " + type_text(a.type) + " dropped");
  }
  return true;
}

DoubleDecrementResult double_decrement_check(const TypeEnv& env, const Subject& u,
                          const std::vector<Type>& objects, Attr a1, Attr a2) {
  Type t1 = Type::chan(objects, a1);
  Type t2 = Type::chan(objects, a2);
  TypeEnv before = env;
  before.add(u, t1);
  before.add(u, t2);
  auto pre = is_consistent(before);
  if (!pre.consistent)
    return {false, "precondition failed: " + pre.reason};

  Decrement d1 = decrement(t1);
  Decrement d2 = decrement(t2);
  if (d1.status == Decrement::Status::Undefined ||
      d2.status == Decrement::Status::Undefined)
    return {false, "precondition failed: decrement undefined"};

  TypeEnv after = env;
  if (d1.status == Decrement::Status::Ok) after.add(u, *d1.type);
  if (d2.status == Decrement::Status::Ok) after.add(u, *d2.type);

  std::string reason;
  if (!consistent_from(after, pre.witness->origin, nullptr, &reason))
    return {false, "decremented environment lost its origin: " + reason};
  return {true, ""};
}

}  // namespace pir
