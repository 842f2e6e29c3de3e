// End-to-end gate for the reference implementation. Each numbered criterion
// prints exactly one PASS/FAIL line; the binary exits nonzero if any fails.
#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "gen.hpp"
#include "pir/ast.hpp"
#include "pir/derivation_io.hpp"
#include "pir/parser.hpp"
#include "pir/semantics.hpp"
#include "pir/typecheck.hpp"
#include "pir/types.hpp"

using namespace pir;

namespace {

const std::vector<std::string> kAccepted = {
    "nil.pir",           "alloc_free.pir",      "client0.pir",
    "client1.pir",       "client2.pir",         "client3.pir",
    "client4.pir",       "client0_system.pir",  "client1_system.pir",
    "client2_system.pir", "client3_system.pir", "client4_system.pir",
    "system2.pir",       "infheap.pir",         "consistency_ex.pir",
    "leak_ex.pir"};

std::string g_bin;
std::string g_corpus;

struct CmdResult {
  int rc = -1;
  std::string out;
};

CmdResult run_cmd(const std::string& cmd) {
  CmdResult r;
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  int status = pclose(pipe);
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string corpus_path(const std::string& fname) { return g_corpus + "/" + fname; }

SourceFile load(const std::string& fname) {
  std::ifstream in(corpus_path(fname));
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  auto r = parse_source(text);
  if (auto* e = std::get_if<ParseError>(&r))
    throw std::runtime_error(fname + ": " + e->message);
  return std::get<SourceFile>(r);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// 1. the tool's verdict on each corpus system, against the known answers
Outcome criterion1() {
  auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::pair<std::string, int>> verdicts = {
      {"client0_system.pir", 0},        {"client1_system.pir", 0},
      {"client2_system.pir", 0},        {"client3_system.pir", 0},
      {"system2.pir", 0},               {"client4_system.pir", 0},
      {"infheap.pir", 0},               {"client_err_system.pir", 1},
      {"client2_unsafe_system.pir", 1}, {"client3_unsafe_system.pir", 1}};
  int correct = 0;
  std::string misses;
  for (const auto& [fname, want] : verdicts) {
    CmdResult r = run_cmd(g_bin + " check " + corpus_path(fname));
    if (r.rc == want)
      ++correct;
    else
      misses += " " + fname + "(rc=" + std::to_string(r.rc) + ")";
  }
  double secs = seconds_since(t0);
  std::ostringstream d;
  d << correct << "/10 typability verdicts correct in " << secs
    << "s (limit 30s)";
  if (!misses.empty()) d << "; wrong:" << misses;
  return {correct == 10 && secs < 30.0, d.str()};
}

// 2. bounded exploration finds no errors in accepted systems and a
// replayable error in the faulty one
Outcome criterion2() {
  auto t0 = std::chrono::steady_clock::now();
  std::string bad;
  for (const auto& fname : kAccepted) {
    CmdResult r = run_cmd(g_bin + " explore " + corpus_path(fname));
    bool clean = (r.rc == 0 || r.rc == 2) &&
                 r.out.find("errors: 0") != std::string::npos;
    if (!clean) bad += " " + fname + "(rc=" + std::to_string(r.rc) + ")";
  }

  CmdResult faulty = run_cmd(g_bin + " explore " + corpus_path("client_err_system.pir"));
  bool faulty_flagged =
      faulty.rc == 1 && faulty.out.find("errors: 0") == std::string::npos;

  bool replayed = false;
  try {
    Configuration c = file_configuration(load("client_err_system.pir"));
    ExploreReport report = explore(c, {});
    if (!report.errors.empty()) {
      Configuration reached;
      if (replay(c, report.errors[0].steps, &reached))
        for (const auto& w : error_witnesses(reached))
          if (w == report.errors[0].witness) replayed = true;
    }
  } catch (const std::exception&) {
  }

  double secs = seconds_since(t0);
  std::ostringstream d;
  d << "0 error traces across " << kAccepted.size()
    << " accepted configurations; faulty system yields a replayable error; "
    << secs << "s (limit 60s)";
  if (!bad.empty()) d << "; unexpected errors in:" << bad;
  if (!faulty_flagged) d << "; faulty system not flagged";
  if (!replayed) d << "; error trace did not replay";
  return {bad.empty() && faulty_flagged && replayed && secs < 60.0, d.str()};
}

// 3. every reachable state of an accepted system stays typable
Outcome criterion3() {
  std::string bad;
  std::size_t states = 0;
  std::size_t retried = 0;
  for (const auto& fname : kAccepted) {
    SourceFile f = load(fname);
    TypeEnv env = assumptions_env(f);
    Configuration c = file_configuration(f);
    ProbeReport p = subject_reduction_probe(env, c, 20);
    if (p.inconclusive > 0) {
      ++retried;
      InferOptions raised;
      raised.budget = 4 * raised.budget;
      raised.max_index += 2;
      p = subject_reduction_probe(env, c, 20, raised);
      if (p.inconclusive > 0) bad += " " + fname + "(inconclusive)";
    }
    states += p.states_checked;
    if (!p.falsifications.empty())
      bad += " " + fname + "(" + std::to_string(p.falsifications.size()) +
             " falsifications)";
  }
  std::ostringstream d;
  d << "0 falsification candidates over " << states
    << " reachable states of " << kAccepted.size() << " accepted configurations";
  if (retried > 0) d << " (" << retried << " rerun with raised bounds)";
  if (!bad.empty()) d << "; failures:" << bad;
  return {bad.empty(), d.str()};
}

// 4. using two pieces of one identifier keeps the environment consistent
Outcome criterion4() {
  // the two assumptions under test ({u:unq(1)} and {u:aff}) are supplied as
  // attributes; the rest of the environment is empty
  DoubleDecrementResult direct = double_decrement_check(TypeEnv{}, name_subject("u"), {}, unq(1), aff());
  if (!direct.ok) return {false, "the worked instance failed: " + direct.detail};

  std::mt19937_64 rng(2026);
  int checked = 0;
  int failures = 0;
  std::string first_failure;
  while (checked < 500) {
    std::vector<Type> objects;
    int n_obj = static_cast<int>(rng() % 3);
    for (int i = 0; i < n_obj; ++i)
      objects.push_back(Type::chan({}, rng() % 2 ? unr() : aff()));

    std::vector<Type> pieces{Type::chan(objects, rng() % 2 ? unq(0) : unr())};
    int n_split = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n_split; ++i) {
      size_t at = rng() % pieces.size();
      auto parts = split(pieces[at]);
      if (parts.empty()) continue;
      Type fst = parts[0].first, snd = parts[0].second;
      pieces.erase(pieces.begin() + static_cast<long>(at));
      pieces.push_back(fst);
      pieces.push_back(snd);
    }
    std::vector<size_t> usable;
    for (size_t i = 0; i < pieces.size(); ++i)
      if (decrement(pieces[i]).status != Decrement::Status::Undefined)
        usable.push_back(i);
    if (usable.size() < 2) continue;
    size_t i = usable[rng() % usable.size()];
    size_t j = i;
    while (j == i) j = usable[rng() % usable.size()];

    TypeEnv env;
    for (size_t k = 0; k < pieces.size(); ++k)
      if (k != i && k != j) env.add(name_subject("u"), pieces[k]);
    env.add(name_subject("v"), Type::chan({}, unr()));
    DoubleDecrementResult res =
        double_decrement_check(env, name_subject("u"), objects, pieces[i].attr, pieces[j].attr);
    if (!res.ok) {
      ++failures;
      if (first_failure.empty())
        first_failure = env.key() + " at " + attr_text(pieces[i].attr) + "," +
                        attr_text(pieces[j].attr) + ": " + res.detail;
    }
    ++checked;
  }
  std::ostringstream d;
  d << "double decrement kept consistency on the worked instance and "
    << (checked - failures) << "/500 randomized environments";
  if (failures > 0) d << "; first failure: " << first_failure;
  return {failures == 0, d.str()};
}

// 5. the attribute algebra: split chains, decrement edges, subtype order
Outcome criterion5() {
  std::vector<std::string> bad;

  for (int k = 0; k <= 8; ++k) {
    Type cur = Type::chan({}, unq(0));
    int affs = 0;
    for (int i = 0; i < k; ++i) {
      auto parts = split(cur);
      if (parts.size() != 1 || parts[0].first.attr != aff()) {
        bad.push_back("split chain broke at k=" + std::to_string(k));
        break;
      }
      ++affs;
      cur = parts[0].second;
    }
    if (affs != k || cur.attr != unq(k))
      bad.push_back("chain k=" + std::to_string(k) + " gave " +
                    std::to_string(affs) + " affine pieces ending at " +
                    attr_text(cur.attr));
  }

  if (decrement(Type::chan({}, unq(0))).status != Decrement::Status::Undefined)
    bad.push_back("a unique-now channel still decremented");
  if (decrement(Type::chan({}, aff())).status != Decrement::Status::Consumed)
    bad.push_back("an affine channel was not consumed");
  if (!attr_subtype(unq(0), unr())) bad.push_back("unq(0) <= unr missing");
  if (attr_subtype(aff(), unr())) bad.push_back("aff <= unr wrongly admitted");
  if (!attr_subtype(unq(2), unq(5)) || attr_subtype(unq(5), unq(2)))
    bad.push_back("unique index order wrong");

  std::ostringstream d;
  if (bad.empty())
    d << "split chains for k <= 8, decrement edge cases, and the attribute "
         "order all hold";
  else
    d << bad.size() << " algebra failures; first: " << bad.front();
  return {bad.empty(), d.str()};
}

void collect_nodes(Derivation& d, std::vector<Derivation*>& out) {
  out.push_back(&d);
  for (auto& p : d.premises) collect_nodes(p, out);
}

std::string wrong_rule_for(const ProcPtr& p) {
  if (holds<OutputP>(p)) return "tIn";
  if (holds<InputP>(p)) return "tOut";
  if (holds<ParP>(p)) return "tIf";
  if (holds<MatchP>(p)) return "tPar";
  if (holds<RecP>(p)) return "tAll";
  if (holds<AllocP>(p)) return "tRec";
  if (holds<FreeP>(p)) return "tNil";
  if (holds<ScopeP>(p)) return "tFree";
  if (holds<PVarP>(p)) return "tNil";
  return "tVar";  // nil
}

// 6. emitted derivations all validate; corrupted copies never do
Outcome criterion6() {
  SearchMemo memo;
  std::vector<Derivation> derivations;
  std::string bad;
  for (const auto& fname : kAccepted) {
    SourceFile f = load(fname);
    InferResult r = check_config(assumptions_env(f), file_configuration(f), {}, &memo);
    if (r.status != InferStatus::Found) {
      bad += " " + fname + "(no derivation)";
      continue;
    }
    ValidationResult v = validate(*r.derivation);
    if (!v.ok) bad += " " + fname + "(invalid at " + v.node_path + ")";
    auto parsed = parse_derivation(serialize_derivation(*r.derivation));
    if (auto* e = std::get_if<ParseError>(&parsed))
      bad += " " + fname + "(reparse: " + e->message + ")";
    else if (!validate(std::get<Derivation>(parsed)).ok)
      bad += " " + fname + "(reparsed copy invalid)";
    derivations.push_back(std::move(*r.derivation));
  }

  if (derivations.empty())
    return {false, "no derivations were emitted at all;" + bad};

  int rejected = 0;
  std::mt19937_64 rng(7);
  for (int m = 0; m < 50; ++m) {
    Derivation copy = derivations[m % derivations.size()];
    std::vector<Derivation*> nodes;
    collect_nodes(copy, nodes);
    Derivation* target = nodes[rng() % nodes.size()];
    switch (m % 3) {
      case 0:
        target->env.add(name_subject("zzz"), Type::chan({}, aff()));
        break;
      case 1:
        if (!holds<NilP>(target->process)) {
          target->process = make_nil();
          break;
        }
        [[fallthrough]];
      default:
        target->rule = wrong_rule_for(target->process);
        break;
    }
    if (!validate(copy).ok) ++rejected;
  }

  std::ostringstream d;
  d << derivations.size() << "/" << kAccepted.size()
    << " emitted derivations validate (and revalidate after a text round "
       "trip); "
    << rejected << "/50 corrupted copies rejected";
  if (!bad.empty()) d << "; problems:" << bad;
  return {bad.empty() && rejected == 50, d.str()};
}

// 7. printer/parser agreement and the brute-force semantics oracle
Outcome criterion7() {
  std::string bad;
  int round_trips = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    ProcPtr p = gen::random_process(seed, 8);
    std::string printed = pretty_process(p);
    auto back = parse_process(printed);
    if (auto* e = std::get_if<ParseError>(&back)) {
      bad += " seed " + std::to_string(seed) + "(parse: " + e->message + ")";
      break;
    }
    ProcPtr q = std::get<ProcPtr>(back);
    if (!alpha_eq(p, q) || pretty_process(q) != printed) {
      bad += " seed " + std::to_string(seed) + "(round trip changed the term)";
      break;
    }
    ++round_trips;
  }

  int agreements = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    Configuration c = gen::random_config(seed);
    std::set<std::string> got;
    for (const auto& s : successors(c)) got.insert(config_key(s.after));
    if (got != gen::naive_successor_keys(c)) {
      bad += " config seed " + std::to_string(seed) + "(successor mismatch)";
      break;
    }
    std::multiset<std::string> w;
    for (const auto& x : error_witnesses(c)) {
      if (x.rule == "eAty")
        w.insert("eAty " + x.channel + " " + std::to_string(x.out_arity) + " " +
                 std::to_string(x.in_arity));
      else
        w.insert(x.rule + " " + x.channel);
    }
    if (w != gen::naive_witnesses(c)) {
      bad += " config seed " + std::to_string(seed) + "(witness mismatch)";
      break;
    }
    ++agreements;
  }

  std::ostringstream d;
  d << round_trips << "/1000 print-parse round trips and " << agreements
    << "/300 oracle agreements";
  if (!bad.empty()) d << "; first failure:" << bad;
  return {round_trips == 1000 && agreements == 300, d.str()};
}

}  // namespace

int main() {
  const char* bin = std::getenv("PIR_BIN");
  const char* corpus = std::getenv("PIR_CORPUS");
  if (!bin || !corpus) {
    std::cerr << "PIR_BIN and PIR_CORPUS must point at the tool and corpus\n";
    return 2;
  }
  g_bin = bin;
  g_corpus = corpus;

  struct Entry {
    int id;
    Outcome (*fn)();
  };
  const Entry entries[] = {{1, criterion1}, {2, criterion2}, {3, criterion3},
                           {4, criterion4}, {5, criterion5}, {6, criterion6},
                           {7, criterion7}};
  bool all = true;
  for (const auto& e : entries) {
    Outcome o;
    try {
      o = e.fn();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << e.id << "  "
              << o.detail << "\n";
  }
  return all ? 0 : 1;
}
