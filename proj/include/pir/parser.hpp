#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pir/ast.hpp"
#include "pir/types.hpp"

namespace pir {

struct ParseError {
  int line = 0;
  int column = 0;
  std::string message;
};

// A .pir file: assumption headers, an optional store declaration, and the
// process body. When the store is present it must cover every free name of
// the body.
struct SourceFile {
  std::vector<std::pair<std::string, Type>> assumptions;
  std::optional<std::map<std::string, ChannelState>> store_decl;
  ProcPtr body;
};

std::variant<SourceFile, ParseError> parse_source(std::string_view text);
std::variant<ProcPtr, ParseError> parse_process(std::string_view text);
std::variant<Type, ParseError> parse_type(std::string_view text);

std::string pretty_process(const ProcPtr& p);
std::string pretty_source(const SourceFile& f);

// Typing environment induced by the assumption headers.
TypeEnv assumptions_env(const SourceFile& f);

// Configuration for the body. A missing store declaration defaults to
// every free name allocated.
Configuration file_configuration(const SourceFile& f);

}  // namespace pir
