#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "pir/derivation_io.hpp"
#include "pir/parser.hpp"
#include "pir/semantics.hpp"
#include "pir/typecheck.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRejected = 1;
constexpr int kInconclusive = 2;
constexpr int kUsage = 3;

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream buf;
  buf << in.rdbuf();
  out = buf.str();
  return true;
}

int parse_failure(const std::string& path, const pir::ParseError& e) {
  std::cerr << path << ":" << e.line << ":" << e.column << ": " << e.message
            << "\n";
  return kUsage;
}

// Loads a .pir file and reports parse problems in the standard format.
// Returns false after printing; `status` then holds the exit code.
bool load_source(const std::string& path, pir::SourceFile& out, int& status) {
  std::string text;
  if (!read_file(path, text)) {
    std::cerr << path << ": cannot read file\n";
    status = kUsage;
    return false;
  }
  auto parsed = pir::parse_source(text);
  if (auto* err = std::get_if<pir::ParseError>(&parsed)) {
    status = parse_failure(path, *err);
    return false;
  }
  out = std::move(std::get<pir::SourceFile>(parsed));
  return true;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string json_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out;
}

int cmd_check(const std::string& path, const std::string& derivation_out,
              int max_index, long budget) {
  pir::SourceFile file;
  int status = kUsage;
  if (!load_source(path, file, status)) return status;

  pir::Configuration config;
  try {
    config = pir::file_configuration(file);
  } catch (const std::invalid_argument& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return kUsage;
  }
  pir::InferOptions opts;
  opts.max_index = max_index;
  opts.budget = budget;
  pir::InferResult result =
      pir::check_config(pir::assumptions_env(file), config, opts);

  switch (result.status) {
    case pir::InferStatus::Found: {
      std::cout << "ACCEPTED\n";
      if (!derivation_out.empty()) {
        std::ofstream out(derivation_out, std::ios::binary);
        if (!out) {
          std::cerr << derivation_out << ": cannot write file\n";
          return kUsage;
        }
        out << pir::serialize_derivation(*result.derivation);
      }
      return kOk;
    }
    case pir::InferStatus::NotTypable:
      std::cout << "REJECTED";
      if (!result.diagnostic.empty()) std::cout << ": " << result.diagnostic;
      std::cout << "\n";
      return kRejected;
    case pir::InferStatus::Inconclusive:
      std::cout << "INCONCLUSIVE";
      if (!result.diagnostic.empty()) std::cout << ": " << result.diagnostic;
      std::cout << "\n";
      return kInconclusive;
  }
  return kUsage;
}

int cmd_run(const std::string& path, std::uint64_t seed, int steps,
            const std::string& trace_format) {
  pir::SourceFile file;
  int status = kUsage;
  if (!load_source(path, file, status)) return status;

  pir::Configuration config;
  try {
    config = pir::file_configuration(file);
    if (!pir::closed(config))
      throw std::invalid_argument("the process must be closed to run");
    pir::RunResult result = pir::run(config, seed, steps);
    int n = 0;
    for (const auto& step : result.trace) {
      ++n;
      if (trace_format == "json") {
        std::cout << "{\"step\": " << n << ", \"rule\": \""
                  << json_escape(step.label.rule) << "\", \"subject\": \""
                  << json_escape(step.label.subject) << "\", \"fresh\": ";
        if (step.label.fresh.empty())
          std::cout << "null";
        else
          std::cout << "\"" << json_escape(step.label.fresh) << "\"";
        std::cout << ", \"state\": \"" << std::hex
                  << fnv1a(pir::config_key(step.after)) << std::dec << "\"}\n";
      } else if (trace_format == "text") {
        std::cout << "step" << n << "  " << pir::label_text(step.label) << "\n";
      }
    }
    std::cout << "HALT " << result.halt << "\n";
    for (const auto& w : result.witnesses)
      std::cout << pir::witness_text(w) << "\n";
    if (!result.witnesses.empty()) return kRejected;
    if (result.halt == "truncated") return kInconclusive;
    return kOk;
  } catch (const std::invalid_argument& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return kUsage;
  }
}

int cmd_explore(const std::string& path, int depth, int unfold,
                std::size_t max_states) {
  pir::SourceFile file;
  int status = kUsage;
  if (!load_source(path, file, status)) return status;

  try {
    pir::Configuration config = pir::file_configuration(file);
    if (!pir::closed(config))
      throw std::invalid_argument("the process must be closed to explore");
    pir::ExploreBounds bounds;
    bounds.max_depth = depth;
    bounds.max_unfold = unfold;
    bounds.max_states = max_states;
    pir::ExploreReport report = pir::explore(config, bounds);

    std::cout << "states: " << report.states << "\n";
    std::cout << "stuck: " << report.stuck << "\n";
    std::cout << "truncated: " << (report.truncated ? "yes" : "no") << "\n";
    std::cout << "errors: " << report.errors.size() << "\n";
    for (const auto& e : report.errors) {
      std::cout << "error " << pir::witness_text(e.witness) << "\n";
      int n = 0;
      for (const auto& label : e.steps)
        std::cout << "  step" << ++n << "  " << pir::label_text(label) << "\n";
    }
    if (!report.errors.empty()) return kRejected;
    if (report.truncated) return kInconclusive;
    return kOk;
  } catch (const std::invalid_argument& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return kUsage;
  }
}

int cmd_validate(const std::string& path) {
  std::string text;
  if (!read_file(path, text)) {
    std::cerr << path << ": cannot read file\n";
    return kUsage;
  }
  auto parsed = pir::parse_derivation(text);
  if (auto* err = std::get_if<pir::ParseError>(&parsed))
    return parse_failure(path, *err);
  pir::ValidationResult result = pir::validate(std::get<pir::Derivation>(parsed));
  if (result.ok) {
    std::cout << "VALID\n";
    return kOk;
  }
  std::cout << "INVALID at node " << (result.node_path.empty() ? "root" : result.node_path)
            << ": " << result.message << "\n";
  return kRejected;
}

int cmd_fmt(const std::string& path) {
  pir::SourceFile file;
  int status = kUsage;
  if (!load_source(path, file, status)) return status;
  std::cout << pir::pretty_source(file);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reference tool for a pi calculus with channel reuse and disposal"};
  app.require_subcommand(1);

  std::string file, derivation_out;
  int max_index = 8;
  long budget = 4000000;
  auto* check = app.add_subcommand("check", "typecheck a .pir file");
  check->add_option("file", file)->required();
  check->add_option("--derivation", derivation_out,
                    "write the typing derivation here");
  check->add_option("--max-index", max_index, "largest unique index searched");
  check->add_option("--budget", budget, "search nodes before giving up");

  std::uint64_t seed = 0;
  int steps = 1000;
  std::string trace_format = "text";
  bool json_trace = false;
  auto* run = app.add_subcommand("run", "execute with a random scheduler");
  run->add_option("file", file)->required();
  run->add_option("--seed", seed, "scheduler seed");
  run->add_option("--steps", steps, "step budget");
  run->add_option("--trace", trace_format, "trace format: text, json or none")
      ->check(CLI::IsMember({"text", "json", "none"}));
  run->add_flag("--json-trace", json_trace, "shorthand for --trace json");

  int depth = 20, unfold = 2;
  std::size_t max_states = 100000;
  auto* explore = app.add_subcommand("explore", "search the reachable states");
  explore->add_option("file", file)->required();
  explore->add_option("--depth", depth, "largest trace length searched");
  explore->add_option("--unfold", unfold, "recursion unfoldings per binder");
  explore->add_option("--max-states", max_states, "state cap");

  auto* validate = app.add_subcommand("validate", "check a derivation file");
  validate->add_option("file", file)->required();

  auto* fmt = app.add_subcommand("fmt", "parse and pretty-print a .pir file");
  fmt->add_option("file", file)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::stringstream out;
    int code = app.exit(e, out, out);
    std::cerr << out.str();
    return code == 0 ? 0 : kUsage;
  }

  if (check->parsed()) return cmd_check(file, derivation_out, max_index, budget);
  if (run->parsed())
    return cmd_run(file, seed, steps, json_trace ? "json" : trace_format);
  if (explore->parsed()) return cmd_explore(file, depth, unfold, max_states);
  if (validate->parsed()) return cmd_validate(file);
  return cmd_fmt(file);
}
