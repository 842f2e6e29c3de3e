#pragma once

#include <compare>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pir {

// Channel usage attributes. Unique carries the number of uses that must
// happen before the channel is exclusively owned again; unq(0) is "unique
// right now".
enum class AttrKind { Affine, Unrestricted, Unique };

struct Attr {
  AttrKind kind = AttrKind::Unrestricted;
  int index = 0;  // meaningful only for Unique

  friend bool operator==(const Attr&, const Attr&) = default;
};

inline Attr aff() { return {AttrKind::Affine, 0}; }
inline Attr unr() { return {AttrKind::Unrestricted, 0}; }
inline Attr unq(int index) { return {AttrKind::Unique, index}; }

struct Type {
  enum class Kind { Chan, Proc };
  Kind kind = Kind::Proc;
  std::vector<Type> objects;  // Chan only
  Attr attr;                  // Chan only

  static Type proc() { return Type{}; }
  static Type chan(std::vector<Type> objects, Attr attr) {
    Type t;
    t.kind = Kind::Chan;
    t.objects = std::move(objects);
    t.attr = attr;
    return t;
  }

  friend bool operator==(const Type&, const Type&) = default;
};

std::string attr_text(const Attr& a);
std::string type_text(const Type& t);

// Total order used to keep environments in a canonical layout.
bool type_less(const Type& a, const Type& b);

// One use of a channel at this type. Affine assumptions are consumed
// outright, unrestricted ones persist, and unique ones count down; a
// channel that is unique right now has no uses left to give.
struct Decrement {
  enum class Status { Consumed, Ok, Undefined };
  Status status = Status::Undefined;
  std::optional<Type> type;  // present iff status == Ok
};

Decrement decrement(const Type& t);

// The decompositions T = T1 . T2 admitted by the splitting relation.
// Affine types do not split.
std::vector<std::pair<Type, Type>> split(const Type& t);

bool attr_subtype(const Attr& a, const Attr& b);

// Object types are invariant: only the attribute may move.
bool subtype(const Type& a, const Type& b);

// ---------------------------------------------------------------------------
// typing environments

enum class SubjectKind { Name, Var, ProcVar };

struct Subject {
  SubjectKind kind = SubjectKind::Name;
  std::string text;

  friend bool operator==(const Subject&, const Subject&) = default;
  friend auto operator<=>(const Subject&, const Subject&) = default;
};

inline Subject name_subject(std::string t) { return {SubjectKind::Name, std::move(t)}; }
inline Subject var_subject(std::string t) { return {SubjectKind::Var, std::move(t)}; }
inline Subject pvar_subject(std::string t) { return {SubjectKind::ProcVar, std::move(t)}; }

struct Assumption {
  Subject subject;
  Type type;

  friend bool operator==(const Assumption&, const Assumption&) = default;
};

// A multiset of typing assumptions. The same subject may carry several
// assumptions at once; that is the whole point of contraction.
class TypeEnv {
 public:
  TypeEnv() = default;

  void add(Subject s, Type t);
  void add(const Assumption& a) { add(a.subject, a.type); }

  // Removes one matching occurrence; false if there is none.
  bool remove_one(const Subject& s, const Type& t);

  [[nodiscard]] const std::vector<Assumption>& items() const { return items_; }
  [[nodiscard]] std::vector<Type> types_of(const Subject& s) const;
  [[nodiscard]] bool has_subject(const Subject& s) const;
  [[nodiscard]] bool contains(const Subject& s, const Type& t) const;
  [[nodiscard]] size_t size() const { return items_.size(); }
  [[nodiscard]] bool empty() const { return items_.empty(); }

  [[nodiscard]] bool is_partial_map() const;

  // Canonical rendering; equal keys iff equal multisets.
  [[nodiscard]] std::string key() const;

  friend bool operator==(const TypeEnv& a, const TypeEnv& b) {
    return a.items_ == b.items_;
  }

  static TypeEnv union_of(const TypeEnv& a, const TypeEnv& b);

  // Multiset difference a \ b.
  static TypeEnv diff(const TypeEnv& a, const TypeEnv& b);

 private:
  std::vector<Assumption> items_;  // sorted by (subject, type_text)
};

// ---------------------------------------------------------------------------
// consistency

struct ConsistencyMove {
  std::string rule;  // tCon | tWeak | tSub | tRev
  std::string detail;
};

struct ConsistencyWitness {
  TypeEnv origin;  // a partial function the environment grows out of
  std::vector<ConsistencyMove> moves;
};

struct ConsistencyResult {
  bool consistent = false;
  std::optional<ConsistencyWitness> witness;
  std::string reason;  // set when inconsistent
};

ConsistencyResult is_consistent(const TypeEnv& env);

// Same check but with the origin fixed in advance.
bool consistent_from(const TypeEnv& env, const TypeEnv& origin,
                     std::vector<ConsistencyMove>* moves = nullptr,
                     std::string* reason = nullptr);

// Decrementing two assumptions of one identifier in a consistent
// environment must leave it consistent from the unchanged origin.
struct DoubleDecrementResult {
  bool ok = false;
  std::string detail;
};

DoubleDecrementResult double_decrement_check(const TypeEnv& env, const Subject& u,
                          const std::vector<Type>& objects, Attr a1, Attr a2);

}  // namespace pir
