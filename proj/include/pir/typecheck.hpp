#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pir/ast.hpp"
#include "pir/types.hpp"

namespace pir {

// One node of a typing derivation. The judgment is env |- process, except for
// the rule "tConf" where it is env |- <store, process>. Premises are ordered.
struct Derivation {
  std::string rule;
  TypeEnv env;
  ProcPtr process;
  std::map<std::string, ChannelState> store;  // tConf only
  std::vector<Derivation> premises;
};

struct ValidationResult {
  bool ok = true;
  std::string node_path;  // premise indices from the root, e.g. "0.1"
  std::string message;
};

// Checks every node against its rule. Rule data (which assumption was split,
// weakened, revised, ...) is reconstructed from the environment deltas.
ValidationResult validate(const Derivation& d);

enum class InferStatus { Found, NotTypable, Inconclusive };

struct InferOptions {
  long budget = 4000000;  // search nodes before giving up as inconclusive
  int max_index = 8;      // cap on unique indices reachable through splitting
};

struct InferResult {
  InferStatus status = InferStatus::NotTypable;
  std::optional<Derivation> derivation;
  std::string diagnostic;
};

class SearchMemo;  // shared across calls so related judgments reuse work

InferResult infer(const TypeEnv& env, const ProcPtr& p,
                  const InferOptions& opts = {}, SearchMemo* memo = nullptr);

// Wraps infer with the configuration rule: env must be a partial map whose
// names are all Allocated in the store.
InferResult check_config(const TypeEnv& env, const Configuration& c,
                         const InferOptions& opts = {},
                         SearchMemo* memo = nullptr);

struct ProbeReport {
  std::size_t states_checked = 0;
  std::size_t inconclusive = 0;
  bool truncated = false;
  std::vector<std::string> falsifications;  // state_text of offending states
};

// Breadth-first over reachable configurations: every state must stay typable
// under the starting assumptions restricted to its live channels. A state
// where that fails outright is reported as a falsification candidate.
ProbeReport subject_reduction_probe(const TypeEnv& env, const Configuration& c,
                                    int depth, const InferOptions& opts = {});

class SearchMemo {
 public:
  SearchMemo();
  ~SearchMemo();
  SearchMemo(const SearchMemo&) = delete;
  SearchMemo& operator=(const SearchMemo&) = delete;
  struct Impl;
  Impl* impl;
};

}  // namespace pir
