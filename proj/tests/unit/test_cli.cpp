#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kld/cli.hpp"
#include "kld/csv.hpp"

using namespace kld;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t lines(const fs::path& p) {
  const auto s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("kld-cli-test-" + name);
  fs::remove_all(dir);
  return dir;
}

const char* kSmall =
    "[model]\nbuiltin = drift-interval\n[grid]\nnv = 32\nnx = 32\n"
    "[hamiltonian]\np_min = -3.5\np_max = 3.5\np_steps = 15\n"
    "[kinetic]\neps = 0.4, 0.2, 0.1\nT = 0.1\nsnapshots = 0.05\n[hj]\nT = 0.1\nsnapshots = 0.05\n"
    "[simulate]\nn = 1000\nt_final = 5\np = 0; 0.5\nendpoints = true\n";

}  // namespace

TEST_CASE("number formatting") {
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(1.0) == "1");
  CHECK(format_number(1.0 / 0.0) == "inf");
}

TEST_CASE("validate writes a report") {
  const auto out = scratch("validate");
  CHECK(dispatch("validate", parse_config(kSmall), out) == kExitOk);
  const auto text = slurp(out / "validate.csv");
  CHECK(text.rfind("quantity,value\n", 0) == 0);
  CHECK(text.find("passed,1\n") != std::string::npos);

  // 1 + div Gamma = 1 - 6 v^2 dips below alpha
  const auto bad = parse_config("[model]\nkind = interval\nM = \"1/2\"\ngamma = \"1-v^2\"\nalpha = 0.5\n");
  CHECK(dispatch("validate", bad, out) == kExitAssumption);
  CHECK(slurp(out / "validate.csv").find("passed,0\n") != std::string::npos);
  CHECK(dispatch("stationary", bad, out) == kExitAssumption);
}

TEST_CASE("every subcommand runs on a small config") {
  const auto cfg = parse_config(kSmall);
  const auto out = scratch("all");
  for (const auto& name : subcommands()) CHECK_MESSAGE(dispatch(name, cfg, out) == kExitOk, name);
  CHECK(lines(out / "compare.csv") == 4);
  CHECK(slurp(out / "compare.csv").rfind("eps,T,linf_error,l1_error,max_spread\n", 0) == 0);
  CHECK(lines(out / "hamiltonian.csv") == 16);
  CHECK(lines(out / "hj.csv") == 1 + 2 * 32);
  CHECK(lines(out / "kinetic.csv") == 1 + 3 * 2 * 32);
  CHECK(lines(out / "simulate.csv") == 3);
  CHECK(lines(out / "endpoints.csv") == 1001);
  CHECK(lines(out / "legendre.csv") == 202);
  CHECK(dispatch("nonsense", cfg, out) == kExitInternal);

  const auto sphere = parse_config("[model]\nbuiltin = sphere-rotor\n[grid]\nnv = 8\nbands = 8\nnx = 16\n"
                                   "[kinetic]\neps = 0.2\nT = 0.05\n");
  CHECK(dispatch("kinetic", sphere, out) == kExitOk);
}

TEST_CASE("outputs are byte-identical across runs") {
  const auto cfg = parse_config(kSmall);
  const auto a = scratch("det-a"), b = scratch("det-b");
  for (const char* name : {"hamiltonian", "simulate", "kinetic"}) {
    REQUIRE(dispatch(name, cfg, a) == kExitOk);
    REQUIRE(dispatch(name, cfg, b) == kExitOk);
  }
  for (const char* file : {"hamiltonian.csv", "simulate.csv", "endpoints.csv", "kinetic_diagnostics.csv"})
    CHECK_MESSAGE(slurp(a / file) == slurp(b / file), file);

  REQUIRE(dispatch("simulate", cfg, b, {std::uint64_t{99}}) == kExitOk);
  CHECK(slurp(a / "endpoints.csv") != slurp(b / "endpoints.csv"));
}
