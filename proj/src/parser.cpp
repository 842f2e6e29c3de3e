#include "pir/parser.hpp"

#include <cctype>
#include <functional>
#include <sstream>

namespace pir {

namespace {

enum class Tok {
  Ident,
  Nat,
  Bang,
  Query,
  LParen,
  RParen,
  LBrace,
  RBrace,
  Dot,
  Bar,
  Colon,
  Semi,
  Comma,
  Eq,
  At,
  KwAssume,
  KwStore,
  KwIn,
  KwNil,
  KwIf,
  KwThen,
  KwElse,
  KwRec,
  KwNew,
  KwAlloc,
  KwDealloc,
  KwFree,
  KwCh,
  KwProc,
  KwAff,
  KwUnr,
  KwUnq,
  End,
};

struct Token {
  Tok kind;
  std::string text;
  long nat = 0;
  int line = 1;
  int column = 1;
  bool dollar = false;  // identifier written as $x: always a variable
};

struct LexFail {
  int line, column;
  std::string message;
};

std::variant<std::vector<Token>, LexFail> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto push = [&](Tok k, std::string text, long nat = 0) {
    out.push_back({k, std::move(text), nat, line, col});
  };
  while (i < src.size()) {
    unsigned char c = src[i];
    if (c == '\n') {
      ++line;
      col = 1;
      ++i;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') {
      ++col;
      ++i;
      continue;
    }
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    // Unicode aliases: nu for new, top/bottom for the channel states.
    if (src.substr(i, 2) == "\xce\xbd") {
      push(Tok::KwNew, "new");
      i += 2;
      ++col;
      continue;
    }
    if (src.substr(i, 3) == "\xe2\x8a\xa4") {
      push(Tok::KwAlloc, "alloc");
      i += 3;
      ++col;
      continue;
    }
    if (src.substr(i, 3) == "\xe2\x8a\xa5") {
      push(Tok::KwDealloc, "dealloc");
      i += 3;
      ++col;
      continue;
    }
    if (std::isdigit(c)) {
      size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      std::string text(src.substr(i, j - i));
      push(Tok::Nat, text, std::stol(text));
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    if (c == '$') {
      size_t j = i + 1;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) ||
                                src[j] == '_'))
        ++j;
      if (j == i + 1 || std::isdigit(static_cast<unsigned char>(src[i + 1])))
        return LexFail{line, col, "expected a variable after '$'"};
      out.push_back({Tok::Ident, std::string(src.substr(i + 1, j - i - 1)), 0,
                     line, col, true});
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    if (std::isalpha(c) || c == '_') {
      size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) ||
                                src[j] == '_'))
        ++j;
      std::string text(src.substr(i, j - i));
      Tok k = Tok::Ident;
      if (text == "assume") k = Tok::KwAssume;
      else if (text == "store") k = Tok::KwStore;
      else if (text == "in") k = Tok::KwIn;
      else if (text == "nil") k = Tok::KwNil;
      else if (text == "if") k = Tok::KwIf;
      else if (text == "then") k = Tok::KwThen;
      else if (text == "else") k = Tok::KwElse;
      else if (text == "rec") k = Tok::KwRec;
      else if (text == "new") k = Tok::KwNew;
      else if (text == "alloc") k = Tok::KwAlloc;
      else if (text == "dealloc") k = Tok::KwDealloc;
      else if (text == "free") k = Tok::KwFree;
      else if (text == "ch") k = Tok::KwCh;
      else if (text == "proc") k = Tok::KwProc;
      else if (text == "aff") k = Tok::KwAff;
      else if (text == "unr") k = Tok::KwUnr;
      else if (text == "unq") k = Tok::KwUnq;
      push(k, std::move(text));
      col += static_cast<int>(j - i);
      i = j;
      continue;
    }
    Tok k;
    switch (c) {
      case '!': k = Tok::Bang; break;
      case '?': k = Tok::Query; break;
      case '(': k = Tok::LParen; break;
      case ')': k = Tok::RParen; break;
      case '{': k = Tok::LBrace; break;
      case '}': k = Tok::RBrace; break;
      case '.': k = Tok::Dot; break;
      case '|': k = Tok::Bar; break;
      case ':': k = Tok::Colon; break;
      case ';': k = Tok::Semi; break;
      case ',': k = Tok::Comma; break;
      case '=': k = Tok::Eq; break;
      case '@': k = Tok::At; break;
      default:
        return LexFail{line, col, std::string("unexpected character '") +
                                      static_cast<char>(c) + "'"};
    }
    push(k, std::string(1, static_cast<char>(c)));
    ++col;
    ++i;
  }
  out.push_back({Tok::End, "", 0, line, col});
  return out;
}

struct ParseFail {
  ParseError err;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  SourceFile source() {
    SourceFile f;
    while (at(Tok::KwAssume)) {
      next();
      Token id = expect_plain(Tok::Ident, "assumption identifier");
      expect(Tok::Colon, "':'");
      Type t = type();
      expect(Tok::Semi, "';'");
      f.assumptions.emplace_back(id.text, std::move(t));
    }
    std::optional<Token> store_tok;
    if (at(Tok::KwStore)) {
      store_tok = peek();
      next();
      expect(Tok::LBrace, "'{'");
      std::map<std::string, ChannelState> store;
      if (!at(Tok::RBrace)) {
        for (;;) {
          Token id = expect_plain(Tok::Ident, "channel name");
          expect(Tok::Colon, "':'");
          store[id.text] = state();
          if (!at(Tok::Comma)) break;
          next();
        }
      }
      expect(Tok::RBrace, "'}'");
      expect(Tok::KwIn, "'in'");
      f.store_decl = std::move(store);
    }
    f.body = par();
    expect(Tok::End, "end of input");
    if (f.store_decl) {
      std::string missing;
      for (const auto& n : free_names(f.body))
        if (!f.store_decl->count(n)) missing += (missing.empty() ? "" : ", ") + n;
      if (!missing.empty())
        fail(*store_tok, "store declaration does not cover free names: " + missing);
    }
    return f;
  }

  ProcPtr process_only() {
    ProcPtr p = par();
    expect(Tok::End, "end of input");
    return p;
  }

  Type type_only() {
    Type t = type();
    expect(Tok::End, "end of input");
    return t;
  }

 private:
  std::vector<Token> toks_;
  size_t pos_ = 0;
  // Innermost-first binder stack; decides whether an identifier occurrence
  // is a Var or a Name.
  std::vector<std::pair<std::string, IdKind>> binders_;

  const Token& peek() const { return toks_[pos_]; }
  bool at(Tok k) const { return peek().kind == k; }
  Token next() { return toks_[pos_++]; }

  [[noreturn]] void fail(const Token& t, const std::string& message) {
    throw ParseFail{{t.line, t.column, message}};
  }

  Token expect(Tok k, const std::string& what) {
    if (!at(k)) fail(peek(), "expected " + what);
    return next();
  }

  Ident classify(const Token& t) const {
    if (t.dollar) return var(t.text);
    for (auto it = binders_.rbegin(); it != binders_.rend(); ++it)
      if (it->first == t.text) return {it->second, t.text};
    return name(t.text);
  }

  Token expect_plain(Tok k, const std::string& what) {
    Token t = expect(k, what);
    if (t.dollar) fail(t, "expected " + what + ", not a '$' variable");
    return t;
  }

  ChannelState state() {
    if (at(Tok::KwAlloc)) {
      next();
      return ChannelState::Allocated;
    }
    if (at(Tok::KwDealloc)) {
      next();
      return ChannelState::Deallocated;
    }
    fail(peek(), "expected 'alloc' or 'dealloc'");
  }

  Type type() {
    if (at(Tok::KwProc)) {
      next();
      return Type::proc();
    }
    if (at(Tok::KwCh)) {
      next();
      expect(Tok::LParen, "'('");
      std::vector<Type> objects;
      if (!at(Tok::RParen)) {
        for (;;) {
          objects.push_back(type());
          if (!at(Tok::Comma)) break;
          next();
        }
      }
      expect(Tok::RParen, "')'");
      expect(Tok::At, "'@'");
      return Type::chan(std::move(objects), attr());
    }
    fail(peek(), "expected a type");
  }

  Attr attr() {
    if (at(Tok::KwAff)) {
      next();
      return aff();
    }
    if (at(Tok::KwUnr)) {
      next();
      return unr();
    }
    if (at(Tok::KwUnq)) {
      next();
      expect(Tok::LParen, "'('");
      Token n = expect(Tok::Nat, "a natural number");
      expect(Tok::RParen, "')'");
      return unq(static_cast<int>(n.nat));
    }
    fail(peek(), "expected 'aff', 'unr' or 'unq'");
  }

  ProcPtr par() {
    ProcPtr left = seq();
    while (at(Tok::Bar)) {
      next();
      left = make_par(std::move(left), seq());
    }
    return left;
  }

  ProcPtr seq() {
    if (at(Tok::KwNil)) {
      next();
      return make_nil();
    }
    if (at(Tok::LParen)) {
      next();
      ProcPtr p = par();
      expect(Tok::RParen, "')'");
      return p;
    }
    if (at(Tok::KwIf)) {
      next();
      Token l = expect(Tok::Ident, "identifier");
      expect(Tok::Eq, "'='");
      Token r = expect(Tok::Ident, "identifier");
      expect(Tok::KwThen, "'then'");
      ProcPtr then_branch = seq();
      expect(Tok::KwElse, "'else'");
      ProcPtr else_branch = seq();
      return make_match(classify(l), classify(r), std::move(then_branch),
                        std::move(else_branch));
    }
    if (at(Tok::KwRec)) {
      next();
      Token x = expect_plain(Tok::Ident, "process variable");
      expect(Tok::Dot, "'.'");
      ProcPtr body = seq();
      return make_rec(x.text, std::move(body));
    }
    if (at(Tok::KwNew)) {
      next();
      Token n = expect_plain(Tok::Ident, "channel name");
      expect(Tok::Colon, "':'");
      ChannelState s = state();
      expect(Tok::Dot, "'.'");
      binders_.emplace_back(n.text, IdKind::Name);
      ProcPtr body = seq();
      binders_.pop_back();
      return make_scope(n.text, s, std::move(body));
    }
    if (at(Tok::KwAlloc)) {
      next();
      Token x = expect(Tok::Ident, "variable");
      expect(Tok::Dot, "'.'");
      binders_.emplace_back(x.text, IdKind::Var);
      ProcPtr body = seq();
      binders_.pop_back();
      return make_alloc(x.text, std::move(body));
    }
    if (at(Tok::KwFree)) {
      next();
      Token u = expect(Tok::Ident, "identifier");
      expect(Tok::Dot, "'.'");
      return make_free(classify(u), seq());
    }
    if (at(Tok::Ident)) {
      Token id = next();
      if (at(Tok::Bang)) {
        next();
        expect(Tok::LParen, "'('");
        std::vector<Ident> objects;
        if (!at(Tok::RParen)) {
          for (;;) {
            Token o = expect(Tok::Ident, "identifier");
            objects.push_back(classify(o));
            if (!at(Tok::Comma)) break;
            next();
          }
        }
        expect(Tok::RParen, "')'");
        expect(Tok::Dot, "'.'");
        return make_output(classify(id), std::move(objects), seq());
      }
      if (at(Tok::Query)) {
        next();
        expect(Tok::LParen, "'('");
        std::vector<std::string> params;
        std::vector<Token> param_toks;
        if (!at(Tok::RParen)) {
          for (;;) {
            Token x = expect(Tok::Ident, "variable");
            for (const auto& seen : params)
              if (seen == x.text) fail(x, "input parameters must be pairwise distinct");
            params.push_back(x.text);
            param_toks.push_back(x);
            if (!at(Tok::Comma)) break;
            next();
          }
        }
        expect(Tok::RParen, "')'");
        expect(Tok::Dot, "'.'");
        size_t depth = binders_.size();
        for (const auto& x : params) binders_.emplace_back(x, IdKind::Var);
        ProcPtr cont = seq();
        binders_.resize(depth);
        return make_input(classify(id), std::move(params), std::move(cont));
      }
      // A bare identifier in process position is a recursion variable.
      if (id.dollar) fail(id, "a variable cannot stand alone as a process");
      return make_pvar(id.text);
    }
    fail(peek(), "expected a process");
  }
};

template <class T, class F>
std::variant<T, ParseError> run_parser(std::string_view text, F&& f) {
  auto lexed = lex(text);
  if (std::holds_alternative<LexFail>(lexed)) {
    const auto& e = std::get<LexFail>(lexed);
    return ParseError{e.line, e.column, e.message};
  }
  Parser p(std::move(std::get<std::vector<Token>>(lexed)));
  try {
    return f(p);
  } catch (const ParseFail& e) {
    return e.err;
  }
}

}  // namespace

std::variant<SourceFile, ParseError> parse_source(std::string_view text) {
  return run_parser<SourceFile>(text, [](Parser& p) { return p.source(); });
}

std::variant<ProcPtr, ParseError> parse_process(std::string_view text) {
  return run_parser<ProcPtr>(text, [](Parser& p) { return p.process_only(); });
}

std::variant<Type, ParseError> parse_type(std::string_view text) {
  return run_parser<Type>(text, [](Parser& p) { return p.type_only(); });
}

// ---------------------------------------------------------------------------
// pretty printing

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void print_seq(const ProcPtr& p, std::string& out);

void print_par(const ProcPtr& p, std::string& out) {
  if (holds<ParP>(p)) {
    const auto& n = get<ParP>(p);
    print_par(n.left, out);
    out += " | ";
    // `|` parses left-associative, so a right-nested par needs parens
    if (holds<ParP>(n.right)) {
      out += '(';
      print_par(n.right, out);
      out += ')';
    } else {
      print_seq(n.right, out);
    }
    return;
  }
  print_seq(p, out);
}

void print_seq(const ProcPtr& p, std::string& out) {
  std::visit(Overloaded{
                 [&](const OutputP& n) {
                   out += n.subject.text;
                   out += "!(";
                   for (size_t i = 0; i < n.objects.size(); ++i) {
                     if (i) out += ", ";
                     out += n.objects[i].text;
                   }
                   out += "). ";
                   print_seq(n.cont, out);
                 },
                 [&](const InputP& n) {
                   out += n.subject.text;
                   out += "?(";
                   for (size_t i = 0; i < n.params.size(); ++i) {
                     if (i) out += ", ";
                     out += n.params[i];
                   }
                   out += "). ";
                   print_seq(n.cont, out);
                 },
                 [&](const NilP&) { out += "nil"; },
                 [&](const MatchP& n) {
                   out += "if ";
                   out += n.left.text;
                   out += " = ";
                   out += n.right.text;
                   out += " then ";
                   print_seq(n.then_branch, out);
                   out += " else ";
                   print_seq(n.else_branch, out);
                 },
                 [&](const RecP& n) {
                   out += "rec ";
                   out += n.binder;
                   out += ". ";
                   print_seq(n.body, out);
                 },
                 [&](const PVarP& n) { out += n.label; },
                 [&](const ParP&) {
                   out += '(';
                   print_par(p, out);
                   out += ')';
                 },
                 [&](const ScopeP& n) {
                   out += "new ";
                   out += n.name;
                   out += ':';
                   out += state_text(n.state);
                   out += ". ";
                   print_seq(n.body, out);
                 },
                 [&](const AllocP& n) {
                   out += "alloc ";
                   out += n.binder;
                   out += ". ";
                   print_seq(n.body, out);
                 },
                 [&](const FreeP& n) {
                   out += "free ";
                   out += n.subject.text;
                   out += ". ";
                   print_seq(n.cont, out);
                 },
             },
             p->node);
}

}  // namespace

std::string pretty_process(const ProcPtr& p) {
  std::string out;
  print_par(p, out);
  return out;
}

std::string pretty_source(const SourceFile& f) {
  std::string out;
  for (const auto& [name, type] : f.assumptions) {
    out += "assume ";
    out += name;
    out += " : ";
    out += type_text(type);
    out += ";\n";
  }
  if (f.store_decl) {
    out += "store { ";
    bool first = true;
    for (const auto& [name, state] : *f.store_decl) {
      if (!first) out += ", ";
      first = false;
      out += name;
      out += ':';
      out += state_text(state);
    }
    out += " } in\n";
  }
  out += pretty_process(f.body);
  out += '\n';
  return out;
}

TypeEnv assumptions_env(const SourceFile& f) {
  TypeEnv env;
  for (const auto& [name, type] : f.assumptions) env.add(name_subject(name), type);
  return env;
}

Configuration file_configuration(const SourceFile& f) {
  std::map<std::string, ChannelState> store;
  if (f.store_decl) {
    store = *f.store_decl;
  } else {
    for (const auto& n : free_names(f.body)) store[n] = ChannelState::Allocated;
  }
  return make_configuration(std::move(store), f.body);
}

}  // namespace pir
