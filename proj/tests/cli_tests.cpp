// End-to-end checks of the command-line binary: exit codes, output
// contracts, and file artifacts. Invoked with the binary path as argv[1].
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

std::string g_cli;
int g_failures = 0;

struct RunResult {
  int exit_code;
  std::string output;
};

RunResult run(const std::string& args) {
  std::string out_file = "cli_test_output.txt";
  std::string cmd = g_cli + " " + args + " > " + out_file + " 2>&1";
  int status = std::system(cmd.c_str());
  int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  std::stringstream buf;
  buf << in.rdbuf();
  std::remove(out_file.c_str());
  return {code, buf.str()};
}

void expect(bool cond, const std::string& what, const RunResult& r) {
  if (cond) {
    std::printf("ok: %s\n", what.c_str());
  } else {
    g_failures++;
    std::printf("FAIL: %s\n  exit=%d\n  output:\n%s\n", what.c_str(), r.exit_code,
                r.output.c_str());
  }
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: cli_tests <path-to-binary>\n");
    return 2;
  }
  g_cli = argv[1];

  {
    RunResult r = run(
        "solve gen:diag=-4,-2,-1,3 -p 2 --auto --oracle --stop-metric evec "
        "--max-iter 2000000 --seed 4");
    expect(r.exit_code == 0, "solve converges with exit 0", r);
    expect(contains(r.output, "CONVERGED"), "solve reports CONVERGED", r);
    expect(contains(r.output, "-3.9999") || contains(r.output, "-4.0000") ||
               contains(r.output, "-4 "),
           "solve recovers the lowest eigenvalue", r);
    expect(contains(r.output, "final e_vec"), "solve prints e_vec with an oracle", r);
  }

  {
    RunResult r = run("solve gen:diag=-4,-2,-1,3 -p 2 --auto --max-iter 1 --seed 4");
    expect(r.exit_code == 2, "hitting max-iter exits 2", r);
    expect(contains(r.output, "MAX_ITER"), "max-iter outcome is reported", r);
  }

  {
    RunResult r = run("solve gen:diag=-2,1 -p 1 --alpha 10 --seed 1 --max-iter 10000");
    expect(r.exit_code == 3, "divergence exits 3", r);
  }

  {
    RunResult r = run("solve gen:diag=-2,1 -p 1 --no-such-flag");
    expect(r.exit_code == 64, "unknown flag exits 64", r);
  }
  {
    RunResult r = run("frobnicate");
    expect(r.exit_code == 64, "unknown subcommand exits 64", r);
  }

  {
    RunResult r = run("verify gen:lap2d=2,2,5 -p 2 --suite tangent");
    expect(r.exit_code == 4, "degenerate pair refuses with exit 4", r);
    expect(contains(r.output, "REFUSED"), "refusal is printed", r);
  }

  {
    RunResult r = run("verify gen:diag=-4,-2,-1,3 -p 2 --suite all --seed 3");
    expect(r.exit_code == 0, "verify all passes on the reference matrix", r);
    expect(contains(r.output, "fixed-points"), "fixed-points suite ran", r);
    expect(contains(r.output, "neighborhoods"), "neighborhoods suite ran", r);
    expect(!contains(r.output, "FAIL"), "no suite failed", r);
  }

  {
    RunResult r = run("gen gen:diag=-4,-2,-1,3 --out cli_test_gen.mtx");
    expect(r.exit_code == 0, "gen writes a matrix file", r);
    RunResult s = run("spectrum file:cli_test_gen.mtx -p 2 --top 2");
    expect(s.exit_code == 0, "spectrum reads the generated file", s);
    expect(contains(s.output, "q = 3"), "spectrum reports q", s);
    expect(contains(s.output, "lambda_1 = -4"), "spectrum prints the lowest pair", s);
    expect(contains(s.output, "R_1"), "spectrum prints the radii ladder", s);
    expect(contains(s.output, "AUTO stepsize"), "spectrum prints the AUTO stepsize", s);
    std::remove("cli_test_gen.mtx");
  }

  {
    RunResult r = run(
        "solve gen:diag=-4,-2,-1,3 -p 2 --auto --oracle --stop-metric evec "
        "--seed 4 --max-iter 2000000 --trace cli_test_trace.csv --trace-every 1");
    expect(r.exit_code == 0, "solve with tracing succeeds", r);
    RunResult v = run(
        "verify gen:diag=-4,-2,-1,3 -p 2 --suite bounds --replay "
        "cli_test_trace.csv");
    expect(v.exit_code == 0, "replayed bounds suite passes", v);
    std::remove("cli_test_trace.csv");
  }

  {
    RunResult r = run(
        "saddle-escape gen:diag=-4,-2,-1,3 -p 2 --trials 3 --seed 11 "
        "--max-iter 4000000 --monitors");
    expect(r.exit_code == 0, "saddle trials all escape", r);
    expect(contains(r.output, "3/3"), "success count printed", r);
  }

  {
    // Requesting more pairs than there are negative eigenvalues warns and
    // reports trailing zero columns instead of erroring.
    RunResult r = run(
        "solve gen:diag=-1,2,3,4 -p 2 --auto --oracle --seed 3 --max-iter 200000");
    expect(contains(r.output, "warning") && contains(r.output, "exceeds"),
           "p > q prints a warning", r);
    expect(r.exit_code == 0 || r.exit_code == 2, "p > q still runs", r);
  }

  {
    // A JSON config overrides the flags.
    {
      std::ofstream cfg("cli_test_cfg.json");
      cfg << "{\"p\": 1, \"alpha\": null, \"max_iter\": 1, \"tol\": 1e-6, "
             "\"seed\": 2, \"trace_every\": 1, \"monitors\": []}";
    }
    RunResult r = run(
        "solve gen:diag=-4,-2,-1,3 -p 2 --max-iter 999 --config cli_test_cfg.json");
    expect(r.exit_code == 2, "config file overrides the flags (max_iter 1)", r);
    std::remove("cli_test_cfg.json");
  }

  {
    // Identical invocation and seed: byte-identical trace files.
    std::string cmd =
        "solve gen:diag=-4,-2,-1,3 -p 2 --auto --oracle --stop-metric evec "
        "--seed 21 --max-iter 2000000 --trace-every 50 --trace ";
    RunResult a = run(cmd + "cli_det_a.csv");
    RunResult b = run(cmd + "cli_det_b.csv");
    std::ifstream fa("cli_det_a.csv"), fb("cli_det_b.csv");
    std::string ta((std::istreambuf_iterator<char>(fa)),
                   std::istreambuf_iterator<char>());
    std::string tb((std::istreambuf_iterator<char>(fb)),
                   std::istreambuf_iterator<char>());
    expect(a.exit_code == 0 && b.exit_code == 0 && !ta.empty() && ta == tb,
           "same seed gives byte-identical traces", a);
    std::remove("cli_det_a.csv");
    std::remove("cli_det_b.csv");
  }

  if (g_failures == 0) std::printf("all cli checks passed\n");
  return g_failures == 0 ? 0 : 1;
}
