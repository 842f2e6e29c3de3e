#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace {

struct CmdResult {
  int rc = -1;
  std::string out;
};

CmdResult run_cmd(const std::string& cmd) {
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[4096];
  size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string bin() {
  const char* b = std::getenv("PIR_BIN");
  REQUIRE(b != nullptr);
  return b;
}

std::string corpus(const std::string& fname) {
  const char* dir = std::getenv("PIR_CORPUS");
  REQUIRE(dir != nullptr);
  return std::string(dir) + "/" + fname;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("check gives one-word verdicts with matching exit codes") {
  CmdResult ok = run_cmd(bin() + " check " + corpus("client2_system.pir"));
  CHECK(ok.rc == 0);
  CHECK(contains(ok.out, "ACCEPTED"));

  CmdResult bad = run_cmd(bin() + " check " + corpus("client_err_system.pir"));
  CHECK(bad.rc == 1);
  CHECK(contains(bad.out, "REJECTED"));

  write_file("/tmp/pir_cli_broken.pir", "a!(b nil\n");
  CmdResult broken = run_cmd(bin() + " check /tmp/pir_cli_broken.pir");
  CHECK(broken.rc == 3);
  CHECK(contains(broken.out, "1:"));

  CmdResult missing = run_cmd(bin() + " check /tmp/pir_cli_no_such_file.pir");
  CHECK(missing.rc == 3);
}

TEST_CASE("usage mistakes exit with the usage code") {
  CHECK(run_cmd(bin()).rc == 3);
  CHECK(run_cmd(bin() + " frobnicate x.pir").rc == 3);
  CHECK(run_cmd(bin() + " run --trace yaml " + corpus("nil.pir")).rc == 3);
  CHECK(run_cmd(bin() + " --help").rc == 0);
}

TEST_CASE("run output is deterministic and classified by exit code") {
  std::string cmd = bin() + " run --seed 5 --steps 60 " + corpus("client2_system.pir");
  CmdResult first = run_cmd(cmd);
  CmdResult second = run_cmd(cmd);
  CHECK(first.out == second.out);
  CHECK(first.rc == second.rc);

  CmdResult quiet = run_cmd(bin() + " run " + corpus("nil.pir"));
  CHECK(quiet.rc == 0);
  CHECK(contains(quiet.out, "HALT terminated"));

  CmdResult spinning = run_cmd(bin() + " run --steps 5 " + corpus("system2.pir"));
  CHECK(spinning.rc == 2);
  CHECK(contains(spinning.out, "HALT truncated"));
}

TEST_CASE("an erroneous run halts with its witnesses") {
  // seeds are scanned because only some schedules cross the arity mismatch
  bool hit = false;
  for (int seed = 0; seed < 32 && !hit; ++seed) {
    CmdResult r = run_cmd(bin() + " run --seed " + std::to_string(seed) +
                          " --steps 100 " + corpus("client_err_system.pir"));
    if (r.rc != 1) continue;
    hit = true;
    CHECK(contains(r.out, "HALT error"));
    CHECK(contains(r.out, "eAty"));
  }
  CHECK(hit);
}

TEST_CASE("trace formats carry the same halt but different step shapes") {
  std::string base = bin() + " run --seed 0 " + corpus("alloc_free.pir");
  CmdResult text = run_cmd(base);
  CHECK(contains(text.out, "step1"));
  CHECK(contains(text.out, "rAll"));

  CmdResult json = run_cmd(base + " --trace json");
  CHECK(json.rc == 0);
  CHECK(contains(json.out, "{\"step\": 1, \"rule\": \"rAll\""));
  CHECK(contains(json.out, "\"state\": \""));
  CHECK(contains(json.out, "HALT terminated"));

  CmdResult none = run_cmd(base + " --trace none");
  CHECK(!contains(none.out, "step1"));
  CHECK(contains(none.out, "HALT terminated"));
}

TEST_CASE("explore summarizes the reachable space with matching exit codes") {
  CmdResult af = run_cmd(bin() + " explore " + corpus("alloc_free.pir"));
  CHECK(af.rc == 0);
  CHECK(contains(af.out, "states: 3"));
  CHECK(contains(af.out, "errors: 0"));
  CHECK(contains(af.out, "truncated: no"));

  CmdResult err = run_cmd(bin() + " explore " + corpus("client_err_system.pir"));
  CHECK(err.rc == 1);
  CHECK(contains(err.out, "errors: 1"));
  CHECK(contains(err.out, "eAty"));
  CHECK(contains(err.out, "rCom"));

  CmdResult trunc = run_cmd(bin() + " explore " + corpus("client4_system.pir"));
  CHECK(trunc.rc == 2);
  CHECK(contains(trunc.out, "truncated: yes"));
}

TEST_CASE("accepted files certify themselves and validate accepts the proof") {
  const std::vector<std::string> accepted = {
      "nil.pir",           "alloc_free.pir",     "client0.pir",
      "client1.pir",       "client2.pir",        "client3.pir",
      "client4.pir",       "client0_system.pir", "client1_system.pir",
      "client2_system.pir", "client3_system.pir", "client4_system.pir",
      "system2.pir",       "infheap.pir",        "consistency_ex.pir",
      "leak_ex.pir"};
  for (const auto& f : accepted) {
    std::string deriv = "/tmp/pir_cli_deriv.txt";
    CmdResult check = run_cmd(bin() + " check --derivation " + deriv + " " + corpus(f));
    CAPTURE(f);
    CHECK(check.rc == 0);
    CmdResult val = run_cmd(bin() + " validate " + deriv);
    CHECK(val.rc == 0);
    CHECK(contains(val.out, "VALID"));
  }
}

TEST_CASE("validate rejects tampered proofs and unreadable input") {
  std::string deriv = "/tmp/pir_cli_tamper.txt";
  CmdResult check =
      run_cmd(bin() + " check --derivation " + deriv + " " + corpus("consistency_ex.pir"));
  REQUIRE(check.rc == 0);

  std::string text = read_file(deriv);
  size_t at = text.find("tPar");
  REQUIRE(at != std::string::npos);
  text.replace(at, 4, "tRec");
  write_file(deriv, text);
  CmdResult val = run_cmd(bin() + " validate " + deriv);
  CHECK(val.rc == 1);
  CHECK(contains(val.out, "INVALID at node"));

  write_file("/tmp/pir_cli_empty.txt", "");
  CHECK(run_cmd(bin() + " validate /tmp/pir_cli_empty.txt").rc == 3);
}

TEST_CASE("fmt is idempotent and fails cleanly on bad input") {
  std::string once_path = "/tmp/pir_cli_fmt1.pir";
  CmdResult once = run_cmd(bin() + " fmt " + corpus("client3_system.pir"));
  CHECK(once.rc == 0);
  write_file(once_path, once.out);
  CmdResult twice = run_cmd(bin() + " fmt " + once_path);
  CHECK(twice.out == once.out);

  write_file("/tmp/pir_cli_broken.pir", "new :alloc. nil\n");
  CHECK(run_cmd(bin() + " fmt /tmp/pir_cli_broken.pir").rc == 3);
}
