#include "pir/semantics.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace pir {

ThreadView decompose(const ProcPtr& canonical) {
  ThreadView v;
  ProcPtr cur = canonical;
  while (holds<ScopeP>(cur)) {
    const auto& s = get<ScopeP>(cur);
    v.scopes.emplace_back(s.name, s.state);
    cur = s.body;
  }
  // flatten the parallel composition
  std::vector<ProcPtr> stack{cur};
  while (!stack.empty()) {
    ProcPtr p = stack.back();
    stack.pop_back();
    if (holds<ParP>(p)) {
      const auto& n = get<ParP>(p);
      stack.push_back(n.right);
      stack.push_back(n.left);
      continue;
    }
    if (holds<NilP>(p)) continue;
    v.threads.push_back(p);
  }
  // the stack pops left-first, so threads are already in left-to-right order
  return v;
}

ProcPtr recompose(const ThreadView& view) {
  ProcPtr body;
  if (view.threads.empty()) {
    body = make_nil();
  } else {
    body = view.threads.back();
    for (size_t i = view.threads.size() - 1; i-- > 0;)
      body = make_par(view.threads[i], body);
  }
  for (size_t i = view.scopes.size(); i-- > 0;)
    body = make_scope(view.scopes[i].first, view.scopes[i].second, body);
  return body;
}

namespace {

// Innermost scope wins; names not scoped are looked up in the store.
std::optional<ChannelState> channel_state(const ThreadView& v,
                                          const std::map<std::string, ChannelState>& store,
                                          const std::string& name) {
  for (auto it = v.scopes.rbegin(); it != v.scopes.rend(); ++it)
    if (it->first == name) return it->second;
  auto it = store.find(name);
  if (it == store.end()) return std::nullopt;
  return it->second;
}

std::string locus_of(size_t i) { return "t" + std::to_string(i); }

Configuration with_process(const Configuration& c, const ThreadView& v) {
  return Configuration{c.store, canonical_form(recompose(v))};
}

void require_closed(const Configuration& c) {
  if (!closed(c))
    throw std::invalid_argument("reduction needs a closed configuration");
}

}  // namespace

std::string label_text(const StepLabel& l) {
  std::string out = l.rule + "  subject=" + l.subject;
  if (!l.fresh.empty()) out += "  fresh=" + l.fresh;
  out += "  at=" + l.locus;
  return out;
}

std::string witness_text(const ErrorWitness& w) {
  std::string out = w.rule + "  channel=" + w.channel;
  if (w.rule == "eAty")
    out += "  arities=" + std::to_string(w.out_arity) + "/" +
           std::to_string(w.in_arity);
  out += "  at=" + w.locus;
  return out;
}

std::vector<Successor> successors(const Configuration& c) {
  require_closed(c);
  ProcPtr canon = canonical_form(c.process);
  ThreadView v = decompose(canon);
  std::vector<Successor> out;

  auto replace = [&](size_t i, ProcPtr p) {
    ThreadView w = v;
    if (holds<NilP>(p))
      w.threads.erase(w.threads.begin() + static_cast<long>(i));
    else
      w.threads[i] = std::move(p);
    return w;
  };

  for (size_t i = 0; i < v.threads.size(); ++i) {
    const ProcPtr& t = v.threads[i];
    if (holds<RecP>(t)) {
      const auto& n = get<RecP>(t);
      ProcPtr unfolded = subst_procvar(n.body, n.binder, t);
      out.push_back({{"rRec", locus_of(i), n.binder, ""},
                     with_process(c, replace(i, unfolded))});
    } else if (holds<MatchP>(t)) {
      const auto& n = get<MatchP>(t);
      if (n.left == n.right)
        out.push_back({{"rThen", locus_of(i), n.left.text + "=" + n.right.text, ""},
                       with_process(c, replace(i, n.then_branch))});
      else
        out.push_back({{"rElse", locus_of(i), n.left.text + "=" + n.right.text, ""},
                       with_process(c, replace(i, n.else_branch))});
    } else if (holds<AllocP>(t)) {
      const auto& n = get<AllocP>(t);
      std::set<std::string> avoid = all_names(canon);
      for (const auto& [name, state] : c.store) avoid.insert(name);
      std::string fresh = fresh_name("c", avoid);
      ProcPtr body = subst_names(n.body, {{n.binder, fresh}});
      out.push_back({{"rAll", locus_of(i), n.binder, fresh},
                     with_process(c, replace(i, make_scope(fresh, ChannelState::Allocated, body)))});
    } else if (holds<FreeP>(t)) {
      const auto& n = get<FreeP>(t);
      const std::string& ch = n.subject.text;
      bool scoped = false;
      for (size_t k = v.scopes.size(); k-- > 0;) {
        if (v.scopes[k].first != ch) continue;
        scoped = true;
        if (v.scopes[k].second == ChannelState::Allocated) {
          ThreadView w = replace(i, n.cont);
          w.scopes[k].second = ChannelState::Deallocated;
          out.push_back({{"rFree", locus_of(i), ch, ""}, with_process(c, w)});
        }
        break;  // double free on a scoped channel is stuck
      }
      if (!scoped) {
        auto it = c.store.find(ch);
        if (it != c.store.end() && it->second == ChannelState::Allocated) {
          Configuration after = with_process(c, replace(i, n.cont));
          after.store[ch] = ChannelState::Deallocated;
          out.push_back({{"rFree", locus_of(i), ch, ""}, std::move(after)});
        }
      }
    }
  }

  for (size_t i = 0; i < v.threads.size(); ++i) {
    if (!holds<OutputP>(v.threads[i])) continue;
    const auto& o = get<OutputP>(v.threads[i]);
    auto st = channel_state(v, c.store, o.subject.text);
    if (st != ChannelState::Allocated) continue;
    for (size_t j = 0; j < v.threads.size(); ++j) {
      if (j == i || !holds<InputP>(v.threads[j])) continue;
      const auto& in = get<InputP>(v.threads[j]);
      if (in.subject.text != o.subject.text) continue;
      if (in.params.size() != o.objects.size()) continue;
      std::vector<std::pair<std::string, std::string>> subs;
      for (size_t k = 0; k < in.params.size(); ++k)
        subs.emplace_back(in.params[k], o.objects[k].text);
      ProcPtr received = subst_names(in.cont, subs);
      ThreadView w = v;
      std::vector<ProcPtr> threads;
      for (size_t k = 0; k < v.threads.size(); ++k) {
        ProcPtr next = v.threads[k];
        if (k == i) next = o.cont;
        if (k == j) next = received;
        if (!holds<NilP>(next)) threads.push_back(std::move(next));
      }
      w.threads = std::move(threads);
      out.push_back({{"rCom", locus_of(i) + "*" + locus_of(j), o.subject.text, ""},
                     with_process(c, w)});
    }
  }
  return out;
}

std::vector<ErrorWitness> error_witnesses(const Configuration& c) {
  require_closed(c);
  ThreadView v = decompose(canonical_form(c.process));
  std::vector<ErrorWitness> out;
  for (size_t i = 0; i < v.threads.size(); ++i) {
    const ProcPtr& t = v.threads[i];
    if (holds<OutputP>(t)) {
      const auto& n = get<OutputP>(t);
      if (channel_state(v, c.store, n.subject.text) == ChannelState::Deallocated)
        out.push_back({"eOut", n.subject.text, -1, -1, locus_of(i)});
    } else if (holds<InputP>(t)) {
      const auto& n = get<InputP>(t);
      if (channel_state(v, c.store, n.subject.text) == ChannelState::Deallocated)
        out.push_back({"eIn", n.subject.text, -1, -1, locus_of(i)});
    }
  }
  for (size_t i = 0; i < v.threads.size(); ++i) {
    if (!holds<OutputP>(v.threads[i])) continue;
    const auto& o = get<OutputP>(v.threads[i]);
    for (size_t j = 0; j < v.threads.size(); ++j) {
      if (j == i || !holds<InputP>(v.threads[j])) continue;
      const auto& in = get<InputP>(v.threads[j]);
      if (in.subject.text != o.subject.text) continue;
      if (in.params.size() == o.objects.size()) continue;
      out.push_back({"eAty", o.subject.text, static_cast<int>(o.objects.size()),
                     static_cast<int>(in.params.size()),
                     locus_of(i) + "*" + locus_of(j)});
    }
  }
  return out;
}

bool replay(const Configuration& c, const std::vector<StepLabel>& steps,
            Configuration* out) {
  Configuration cur = c;
  for (const auto& step : steps) {
    bool found = false;
    for (auto& s : successors(cur)) {
      if (s.label == step) {
        cur = std::move(s.after);
        found = true;
        break;
      }
    }
    if (!found) {
      if (out) *out = cur;
      return false;
    }
  }
  if (out) *out = cur;
  return true;
}

RunResult run(const Configuration& c, std::uint64_t seed, int max_steps) {
  require_closed(c);
  std::mt19937_64 gen(seed);
  RunResult r;
  r.final_config = c;
  bool quiescent = false;
  for (int step = 0; step < max_steps; ++step) {
    // an erroneous state halts the machine even if other redexes remain
    r.witnesses = error_witnesses(r.final_config);
    if (!r.witnesses.empty()) {
      r.halt = "error";
      return r;
    }
    auto succs = successors(r.final_config);
    if (succs.empty()) {
      quiescent = true;
      break;
    }
    // modulo keeps the choice identical across platforms
    size_t pick = static_cast<size_t>(gen() % succs.size());
    r.trace.push_back({succs[pick].label, succs[pick].after});
    r.final_config = succs[pick].after;
  }
  r.witnesses = error_witnesses(r.final_config);
  if (!r.witnesses.empty()) {
    r.halt = "error";
  } else if (!quiescent && !successors(r.final_config).empty()) {
    r.halt = "truncated";
  } else {
    ThreadView v = decompose(canonical_form(r.final_config.process));
    r.halt = v.threads.empty() ? "terminated" : "stuck";
  }
  return r;
}

namespace {

// Deallocated restrictions on unused names enable nothing; folding them away
// keeps the search space smaller. Used only to identify states.
std::string dedup_key(const Configuration& c) {
  ThreadView v = decompose(canonical_form(c.process));
  std::set<std::string> used;
  for (const auto& t : v.threads) {
    auto f = free_names(t);
    used.insert(f.begin(), f.end());
  }
  ThreadView w;
  for (const auto& sc : v.scopes)
    if (sc.second == ChannelState::Allocated || used.count(sc.first))
      w.scopes.push_back(sc);
  w.threads = v.threads;
  return config_key(Configuration{c.store, recompose(w)});
}

std::string unfold_text(const std::map<std::string, int>& unfolds) {
  std::string s;
  for (const auto& [k, n] : unfolds) s += k + "=" + std::to_string(n) + ";";
  return s;
}

}  // namespace

ExploreReport explore(const Configuration& c, const ExploreBounds& bounds) {
  require_closed(c);
  ExploreReport report;
  report.bounds = bounds;

  struct Node {
    Configuration config;
    std::map<std::string, int> unfolds;
    int depth = 0;
    long parent = -1;
    StepLabel label;
  };
  std::vector<Node> nodes;
  std::deque<long> queue;
  std::unordered_set<std::string> visited;
  std::set<std::string> states, stuck_keys, error_keys;
  const size_t node_cap = bounds.max_states * 8 + 64;

  Configuration start{c.store, canonical_form(c.process)};
  std::string key0 = dedup_key(start);
  states.insert(key0);
  visited.insert(key0 + "|");
  nodes.push_back({std::move(start), {}, 0, -1, {}});
  queue.push_back(0);

  while (!queue.empty()) {
    long idx = queue.front();
    queue.pop_front();
    // copy what we need; nodes may reallocate as children are appended
    Configuration config = nodes[idx].config;
    std::map<std::string, int> unfolds = nodes[idx].unfolds;
    int depth = nodes[idx].depth;
    std::string dkey = dedup_key(config);

    auto witnesses = error_witnesses(config);
    if (!witnesses.empty() && error_keys.insert(dkey).second) {
      ErrorTrace trace;
      trace.witness = witnesses.front();
      for (long n = idx; nodes[n].parent >= 0; n = nodes[n].parent)
        trace.steps.push_back(nodes[n].label);
      std::reverse(trace.steps.begin(), trace.steps.end());
      report.errors.push_back(std::move(trace));
    }

    auto succs = successors(config);
    if (succs.empty()) {
      if (witnesses.empty()) stuck_keys.insert(dkey);
      continue;
    }
    if (depth >= bounds.max_depth) {
      report.truncated = true;
      continue;
    }
    for (auto& s : succs) {
      auto child_unfolds = unfolds;
      if (s.label.rule == "rRec") {
        int& count = child_unfolds[s.label.subject];
        if (count + 1 > bounds.max_unfold) {
          report.truncated = true;
          continue;
        }
        ++count;
      }
      std::string child_key = dedup_key(s.after);
      if (!states.count(child_key)) {
        if (states.size() >= bounds.max_states) {
          report.truncated = true;
          continue;
        }
        states.insert(child_key);
      }
      std::string node_key = child_key + "|" + unfold_text(child_unfolds);
      if (!visited.insert(node_key).second) continue;
      if (nodes.size() >= node_cap) {
        report.truncated = true;
        break;
      }
      nodes.push_back({std::move(s.after), std::move(child_unfolds), depth + 1,
                       idx, s.label});
      queue.push_back(static_cast<long>(nodes.size()) - 1);
    }
  }

  report.states = states.size();
  report.stuck = stuck_keys.size();
  std::sort(report.errors.begin(), report.errors.end(),
            [](const ErrorTrace& a, const ErrorTrace& b) {
              if (a.steps.size() != b.steps.size())
                return a.steps.size() < b.steps.size();
              return witness_text(a.witness) < witness_text(b.witness);
            });
  return report;
}

}  // namespace pir
