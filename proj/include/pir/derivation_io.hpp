#pragma once

#include <string>
#include <variant>

#include "pir/parser.hpp"
#include "pir/typecheck.hpp"

namespace pir {

// Text form of a derivation: one node per line, two spaces of indent per
// premise level, tab-separated fields. Ordinary nodes carry
//   rule <TAB> env <TAB> process
// and tConf nodes carry
//   rule <TAB> env <TAB> store <TAB> process
// Variable subjects are written with a '$' prefix and process variables with
// '%' so the reader can restore identifier kinds exactly.
std::string serialize_derivation(const Derivation& d);
std::variant<Derivation, ParseError> parse_derivation(const std::string& text);

std::string render_env(const TypeEnv& env);
std::variant<TypeEnv, ParseError> parse_env(const std::string& text);

// Like pretty_process but marks every variable occurrence with '$'.
std::string render_process_marked(const ProcPtr& p);

}  // namespace pir
