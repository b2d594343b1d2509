#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "intercity/cli.hpp"
#include "intercity/data_io.hpp"
#include "intercity/nested_logit.hpp"

using namespace intercity;
namespace fs = std::filesystem;

namespace {

const std::string kData = INTERCITY_DATA_DIR;

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir() {
  fs::path dir = fs::temp_directory_path() / "intercity_test_cli";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("help and version exit 0") {
  CHECK(cli({"--help"}).code == kExitOk);
  Run v = cli({"--version"});
  CHECK(v.code == kExitOk);
  CHECK(v.out.find(kToolVersion) != std::string::npos);
}

TEST_CASE("usage errors exit 1") {
  CHECK(cli({}).code == kExitInputError);
  CHECK(cli({"frobnicate"}).code == kExitInputError);
  CHECK(cli({"estimate", "--spec", kData + "/specs/business.json"}).code == kExitInputError);
  CHECK(cli({"estimate", "--spec", "/nonexistent.json", "--data", "/nonexistent.csv"}).code == kExitInputError);
  CHECK(cli({"validate"}).code == kExitInputError);
}

TEST_CASE("validate the shipped inputs") {
  for (const char* purpose : {"business", "nonbusiness"}) {
    const std::string p = std::string(purpose) == "business" ? "business" : "nonbusiness";
    const std::string t = std::string(purpose) == "business" ? "business" : "nonbusiness";
    Run r = cli({"validate", "--spec", kData + "/specs/" + purpose + ".json", "--params", kData + "/params/" + p + ".json",
                 "--scenarios", kData + "/scenarios/policy.json", "--tripgen", kData + "/tripgen/" + t + ".json"});
    CHECK_MESSAGE(r.code == kExitOk, r.err);
    CHECK(r.out.find("ok: ") != std::string::npos);
  }
}

TEST_CASE("estimate on the toy model") {
  const fs::path dir = workdir() / "est";
  fs::remove_all(dir);
  ModelSpec spec = fx::three_by_three();
  save_model_spec(spec, workdir() / "toy.json");
  ChoiceDataset d = simulate_choices(spec, fx::toy_params(spec), fx::toy_data(600, 3), 4);
  save_choice_dataset(d, workdir() / "toy.csv", "business");

  const std::vector<std::string> base{"estimate", "--spec", (workdir() / "toy.json").string(), "--data",
                                      (workdir() / "toy.csv").string()};
  SUBCASE("dry run prints the dataset manifest") {
    auto args = base;
    args.push_back("--dry-run");
    Run r = cli(args);
    CHECK(r.code == kExitOk);
    CHECK(r.out.find("\"observations\": 600") != std::string::npos);
    CHECK_FALSE(fs::exists(dir));
  }
  SUBCASE("full run writes results and a run manifest") {
    auto args = base;
    for (const char* a : {"--out", "--ll0-convention", "constants-only", "--threads", "2"}) args.push_back(a);
    args.insert(args.begin() + 6, dir.string());
    Run r = cli(args);
    CHECK_MESSAGE(r.code == kExitOk, r.err);
    for (const char* f : {"results.json", "params.json", "report.txt", "manifest.json"}) CHECK(fs::exists(dir / f));
    auto m = read_json(dir / "manifest.json");
    CHECK(m["command"] == "estimate");
    CHECK(m["tool_version"] == kToolVersion);
    CHECK(m["inputs"]["spec"]["hash"] == file_hash(workdir() / "toy.json"));
    CHECK(m["timing"]["wall_seconds"].get<double>() >= 0.0);
    CHECK(read_json(dir / "results.json")["ll0_convention"] == "constants-only");
  }
  SUBCASE("a capped optimiser exits 2") {
    auto args = base;
    args.push_back("--max-iterations");
    args.push_back("1");
    CHECK(cli(args).code == kExitNonConvergence);
  }
  SUBCASE("an unknown null convention exits 1") {
    auto args = base;
    args.push_back("--ll0-convention");
    args.push_back("zero");
    CHECK(cli(args).code == kExitInputError);
  }
}

TEST_CASE("invalid data lists every problem and exits 1") {
  const fs::path csv = workdir() / "bad.csv";
  std::ofstream(csv) << "obs_id,individual_id,context,zone,mode,chosen,los:cost[Mil VND]\n"
                        "t1,p1,RP,A,m1,1,-1\n"
                        "t1,p1,RP,A,m2,1,1\n";
  ModelSpec spec = fx::three_by_three();
  save_model_spec(spec, workdir() / "toy.json");
  Run r = cli({"estimate", "--spec", (workdir() / "toy.json").string(), "--data", csv.string()});
  CHECK(r.code == kExitInputError);
  CHECK(r.err.find("row 2: negative cost") != std::string::npos);
  CHECK(r.err.find("row 3: second chosen") != std::string::npos);
  CHECK(r.err.find("missing LOS attribute 'time'") != std::string::npos);
}

TEST_CASE("simulate writes share tables and an induced travel table") {
  const fs::path dir = workdir() / "sim";
  fs::remove_all(dir);
  Run r = cli({"simulate", "--spec", kData + "/specs/business.json", "--params", kData + "/params/business.json",
               "--scenarios", kData + "/scenarios/policy.json", "--tripgen", kData + "/tripgen/business.json",
               "-n", "40", "--seed", "2", "--out", dir.string()});
  CHECK_MESSAGE(r.code == kExitOk, r.err);
  std::ifstream in(dir / "induced_travel.csv");
  std::string line, s4;
  std::getline(in, line);
  CHECK(line == "scenario,mean_trip_rate,index_vs_base");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (line.rfind("S4,", 0) == 0) s4 = line;
  }
  CHECK(rows == 15);
  CHECK(s4.substr(s4.rfind(',') + 1) == "100");
  std::ifstream shares(dir / "mode_shares.csv");
  std::getline(shares, line);
  CHECK(line == "scenario,class,mode,share");
}

TEST_CASE("synth is reproducible") {
  const fs::path a = workdir() / "syn_a", b = workdir() / "syn_b";
  const std::vector<std::string> args{"synth", "--spec", kData + "/specs/nonbusiness.json", "--params",
                                      kData + "/params/nonbusiness.json", "-n", "50", "--seed", "9", "--out"};
  auto with = [&](const fs::path& p) {
    auto v = args;
    v.push_back(p.string());
    return cli(v);
  };
  REQUIRE(with(a).code == kExitOk);
  REQUIRE(with(b).code == kExitOk);
  CHECK(read_text(a / "synthetic.csv") == read_text(b / "synthetic.csv"));
  CHECK(load_choice_dataset(a / "synthetic.csv").manifest.unchosen == 0);
}

TEST_CASE("tripgen fits and writes a model") {
  const fs::path csv = workdir() / "trips.csv";
  {
    std::ofstream f(csv);
    f << "individual_id,trips,edu,age\n";
    const char* edu[] = {"hs", "univ", "grad"};
    for (int i = 0; i < 60; ++i) f << "p" << i << "," << (i * 7) % 5 << "," << edu[i % 3] << "," << 20 + i % 17 << "\n";
  }
  const fs::path dir = workdir() / "trip";
  Run r = cli({"tripgen", "--data", csv.string(), "--covariates", "age", "--categorical", "edu=hs", "--out", dir.string()});
  CHECK_MESSAGE(r.code == kExitOk, r.err);
  PoissonModel m = load_poisson_model(dir / "poisson.json");
  CHECK(m.names == std::vector<std::string>{"(Intercept)", "age", "edu=grad", "edu=univ"});
  CHECK(cli({"tripgen", "--data", csv.string(), "--categorical", "edu"}).code == kExitInputError);
}
