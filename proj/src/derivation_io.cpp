#include "pir/derivation_io.hpp"

#include <cctype>
#include <optional>
#include <vector>

namespace pir {

namespace {

std::string subject_text(const Subject& s) {
  switch (s.kind) {
    case SubjectKind::Var: return "$" + s.text;
    case SubjectKind::ProcVar: return "%" + s.text;
    case SubjectKind::Name: break;
  }
  return s.text;
}

std::string ident_marked(const Ident& id) {
  return id.kind == IdKind::Var ? "$" + id.text : id.text;
}

void print_marked_seq(const ProcPtr& p, std::string& out);

void print_marked_par(const ProcPtr& p, std::string& out) {
  if (holds<ParP>(p)) {
    const auto& n = get<ParP>(p);
    print_marked_par(n.left, out);
    out += " | ";
    // `|` parses left-associative, so a right-nested par needs parens
    if (holds<ParP>(n.right)) {
      out += '(';
      print_marked_par(n.right, out);
      out += ')';
    } else {
      print_marked_seq(n.right, out);
    }
    return;
  }
  print_marked_seq(p, out);
}

void print_marked_seq(const ProcPtr& p, std::string& out) {
  if (holds<OutputP>(p)) {
    const auto& n = get<OutputP>(p);
    out += ident_marked(n.subject);
    out += "!(";
    for (size_t i = 0; i < n.objects.size(); ++i) {
      if (i) out += ", ";
      out += ident_marked(n.objects[i]);
    }
    out += "). ";
    print_marked_seq(n.cont, out);
  } else if (holds<InputP>(p)) {
    const auto& n = get<InputP>(p);
    out += ident_marked(n.subject);
    out += "?(";
    for (size_t i = 0; i < n.params.size(); ++i) {
      if (i) out += ", ";
      out += "$" + n.params[i];
    }
    out += "). ";
    print_marked_seq(n.cont, out);
  } else if (holds<NilP>(p)) {
    out += "nil";
  } else if (holds<MatchP>(p)) {
    const auto& n = get<MatchP>(p);
    out += "if ";
    out += ident_marked(n.left);
    out += " = ";
    out += ident_marked(n.right);
    out += " then ";
    print_marked_seq(n.then_branch, out);
    out += " else ";
    print_marked_seq(n.else_branch, out);
  } else if (holds<RecP>(p)) {
    const auto& n = get<RecP>(p);
    out += "rec ";
    out += n.binder;
    out += ". ";
    print_marked_seq(n.body, out);
  } else if (holds<PVarP>(p)) {
    out += get<PVarP>(p).label;
  } else if (holds<ParP>(p)) {
    out += '(';
    print_marked_par(p, out);
    out += ')';
  } else if (holds<ScopeP>(p)) {
    const auto& n = get<ScopeP>(p);
    out += "new ";
    out += n.name;
    out += ':';
    out += state_text(n.state);
    out += ". ";
    print_marked_seq(n.body, out);
  } else if (holds<AllocP>(p)) {
    const auto& n = get<AllocP>(p);
    out += "alloc $";
    out += n.binder;
    out += ". ";
    print_marked_seq(n.body, out);
  } else {
    const auto& n = get<FreeP>(p);
    out += "free ";
    out += ident_marked(n.subject);
    out += ". ";
    print_marked_seq(n.cont, out);
  }
}

void serialize_node(const Derivation& d, int depth, std::string& out) {
  out.append(static_cast<size_t>(depth) * 2, ' ');
  out += d.rule;
  out += '\t';
  out += render_env(d.env);
  out += '\t';
  if (d.rule == "tConf") {
    bool first = true;
    for (const auto& [name, state] : d.store) {
      if (!first) out += ", ";
      first = false;
      out += name;
      out += ':';
      out += state_text(state);
    }
    out += '\t';
  }
  out += render_process_marked(d.process);
  out += '\n';
  for (const auto& q : d.premises) serialize_node(q, depth + 1, out);
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool plain_ident(const std::string& s) {
  if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0]))) return false;
  for (char ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_') return false;
  return true;
}

struct LineView {
  int number = 0;  // 1-based position in the input
  int depth = 0;
  std::vector<std::string> fields;
};

std::variant<Derivation, ParseError> parse_node_line(const LineView& ln);

std::optional<ParseError> parse_nodes(const std::vector<LineView>& lines,
                                      size_t& idx, int depth, Derivation& out) {
  if (idx >= lines.size())
    return ParseError{lines.empty() ? 1 : lines.back().number, 1,
                      "expected a derivation node"};
  const LineView& ln = lines[idx];
  if (ln.depth != depth)
    return ParseError{ln.number, ln.depth * 2 + 1,
                      "expected indent " + std::to_string(depth * 2) +
                          ", found " + std::to_string(ln.depth * 2)};
  auto node = parse_node_line(ln);
  if (auto* err = std::get_if<ParseError>(&node)) return *err;
  out = std::move(std::get<Derivation>(node));
  ++idx;
  while (idx < lines.size() && lines[idx].depth == depth + 1) {
    Derivation premise;
    if (auto err = parse_nodes(lines, idx, depth + 1, premise)) return err;
    out.premises.push_back(std::move(premise));
  }
  if (idx < lines.size() && lines[idx].depth > depth + 1)
    return ParseError{lines[idx].number, lines[idx].depth * 2 + 1,
                      "indent jumps past the premise level"};
  return std::nullopt;
}

std::variant<Derivation, ParseError> parse_node_line(const LineView& ln) {
  const bool conf = ln.fields[0] == "tConf";
  const size_t want = conf ? 4 : 3;
  if (ln.fields.size() != want)
    return ParseError{ln.number, 1,
                      ln.fields[0] + " needs " + std::to_string(want) +
                          " tab-separated fields, found " +
                          std::to_string(ln.fields.size())};
  Derivation d;
  d.rule = ln.fields[0];

  auto env = parse_env(ln.fields[1]);
  if (auto* err = std::get_if<ParseError>(&env))
    return ParseError{ln.number, err->column, "in the environment: " + err->message};
  d.env = std::move(std::get<TypeEnv>(env));

  if (conf) {
    std::string text = trim(ln.fields[2]);
    size_t pos = 0;
    while (pos < text.size()) {
      size_t comma = text.find(',', pos);
      std::string entry = trim(text.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos));
      size_t colon = entry.find(':');
      if (colon == std::string::npos)
        return ParseError{ln.number, 1, "store entry '" + entry + "' needs name:state"};
      std::string name = trim(entry.substr(0, colon));
      std::string state = trim(entry.substr(colon + 1));
      if (!plain_ident(name))
        return ParseError{ln.number, 1, "bad store channel name '" + name + "'"};
      if (state != "alloc" && state != "dealloc")
        return ParseError{ln.number, 1, "bad channel state '" + state + "'"};
      d.store[name] =
          state == "alloc" ? ChannelState::Allocated : ChannelState::Deallocated;
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }

  auto proc = parse_process(ln.fields[conf ? 3 : 2]);
  if (auto* err = std::get_if<ParseError>(&proc))
    return ParseError{ln.number, err->column, "in the process: " + err->message};
  d.process = std::move(std::get<ProcPtr>(proc));
  return d;
}

}  // namespace

std::string render_env(const TypeEnv& env) {
  std::string out;
  bool first = true;
  for (const auto& a : env.items()) {
    if (!first) out += ", ";
    first = false;
    out += subject_text(a.subject);
    out += " : ";
    out += type_text(a.type);
  }
  return out;
}

std::variant<TypeEnv, ParseError> parse_env(const std::string& text) {
  TypeEnv env;
  std::vector<std::string> pieces;
  std::string cur;
  int depth = 0;
  for (char ch : text) {
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (ch == ',' && depth == 0) {
      pieces.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!trim(cur).empty() || !pieces.empty()) pieces.push_back(cur);
  for (const auto& piece : pieces) {
    std::string entry = trim(piece);
    size_t colon = entry.find(':');
    if (colon == std::string::npos)
      return ParseError{1, 1, "assumption '" + entry + "' needs subject : type"};
    std::string subj = trim(entry.substr(0, colon));
    std::string type_str = trim(entry.substr(colon + 1));
    Subject subject;
    if (subj.size() > 1 && subj[0] == '$') {
      subject = var_subject(subj.substr(1));
    } else if (subj.size() > 1 && subj[0] == '%') {
      subject = pvar_subject(subj.substr(1));
    } else {
      subject = name_subject(subj);
    }
    if (!plain_ident(subject.text))
      return ParseError{1, 1, "bad assumption subject '" + subj + "'"};
    auto t = parse_type(type_str);
    if (auto* err = std::get_if<ParseError>(&t)) return *err;
    env.add(subject, std::move(std::get<Type>(t)));
  }
  return env;
}

std::string render_process_marked(const ProcPtr& p) {
  std::string out;
  print_marked_par(p, out);
  return out;
}

std::string serialize_derivation(const Derivation& d) {
  std::string out;
  serialize_node(d, 0, out);
  return out;
}

std::variant<Derivation, ParseError> parse_derivation(const std::string& text) {
  std::vector<LineView> lines;
  int number = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string line =
        text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    ++number;
    pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
    if (trim(line).empty()) continue;
    size_t spaces = 0;
    while (spaces < line.size() && line[spaces] == ' ') ++spaces;
    if (spaces % 2 != 0)
      return ParseError{number, static_cast<int>(spaces) + 1,
                        "indentation must use pairs of spaces"};
    LineView ln;
    ln.number = number;
    ln.depth = static_cast<int>(spaces / 2);
    std::string rest = line.substr(spaces);
    size_t field_pos = 0;
    for (;;) {
      size_t tab = rest.find('\t', field_pos);
      if (tab == std::string::npos) {
        ln.fields.push_back(rest.substr(field_pos));
        break;
      }
      ln.fields.push_back(rest.substr(field_pos, tab - field_pos));
      field_pos = tab + 1;
    }
    lines.push_back(std::move(ln));
  }
  if (lines.empty()) return ParseError{1, 1, "empty derivation"};
  Derivation root;
  size_t idx = 0;
  if (auto err = parse_nodes(lines, idx, 0, root)) return *err;
  if (idx < lines.size())
    return ParseError{lines[idx].number, 1,
                      "unexpected second root node"};
  return root;
}

}  // namespace pir
