#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "commands.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Outcome {
  int code = 0;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "ics");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome r;
  r.code = ics::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(ICS_TEST_TMP) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Json load_json(const fs::path& p) { return Json::parse(slurp(p)); }

const std::vector<std::string> kShortChains{"--burn-in", "400", "--keep", "400", "--thin", "2",
                                            "--chains", "2"};

}  // namespace

TEST_CASE("simulate writes the study design") {
  const auto dir = scratch("simulate");
  const auto r = run({"simulate", "--seed", "5", "--out-dir", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("62 specimens") != std::string::npos);
  const Json t = load_json(dir / "truth.json");
  CHECK(t["command"] == "simulate");
  CHECK(t["seed"] == 5);
  CHECK(t["design"]["specimens"] == 62);
  CHECK(t.contains("config"));
  CHECK(slurp(dir / "fields.csv").rfind("specimen_id,field_id,tissue,pla\n", 0) == 0);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run({"simulate", "--family", "no_such_family"}).code == 2);
  CHECK(run({"fit", "--method", "bayes"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"--help"}).code == 0);
  const auto missing = run({"fit", "--fields-csv", "/nonexistent/f.csv", "--vessels-csv",
                            "/nonexistent/v.csv"});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("/nonexistent/") != std::string::npos);
  CHECK(run({"power", "--n", "1"}).code == 2);
}

TEST_CASE("simulate is byte-identical across reruns and thread counts") {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b"), c = scratch("rerun_c");
  REQUIRE(run({"simulate", "--seed", "9", "--out-dir", a.string()}).code == 0);
  REQUIRE(run({"simulate", "--seed", "9", "--out-dir", b.string()}).code == 0);
  REQUIRE(run({"simulate", "--seed", "9", "--out-dir", c.string(), "--threads", "3"}).code == 0);
  for (auto f : {"fields.csv", "vessels.csv"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK(slurp(a / f) == slurp(c / f));
  }
  const auto d = scratch("rerun_d");
  REQUIRE(run({"simulate", "--seed", "10", "--out-dir", d.string()}).code == 0);
  CHECK(slurp(a / "vessels.csv") != slurp(d / "vessels.csv"));
}

TEST_CASE("fit by MCMC writes summary, draws and diagnostics") {
  const auto dir = scratch("mcmc");
  REQUIRE(run({"simulate", "--seed", "3", "--out-dir", dir.string()}).code == 0);
  std::vector<std::string> args{"fit", "--method", "mcmc", "--family", "joint", "--out-dir",
                                dir.string()};
  args.insert(args.end(), kShortChains.begin(), kShortChains.end());
  const auto r = run(args);
  CHECK(r.code == 0);
  const Json j = load_json(dir / "summary_joint.json");
  CHECK(j["method"] == "mcmc");
  for (auto name : {"alpha_A", "lambda_A", "lambda_N", "rho", "alpha_N", "beta_N_CARC"}) {
    CAPTURE(name);
    REQUIRE(j["fit"]["parameters"].contains(name));
    CHECK(j["fit"]["parameters"][name].contains("median"));
  }
  CHECK(j["fit"]["parameters"]["lambda_A"]["median"].get<double>() >= 0.0);
  CHECK(j.contains("diagnostics"));
  CHECK(fs::exists(dir / "draws_joint.csv"));
  CHECK(fs::exists(dir / "diagnostics_joint.txt"));

  // same seed and chains, different thread count: identical draws
  const auto other = scratch("mcmc_threads");
  fs::copy_file(dir / "fields.csv", other / "fields.csv");
  fs::copy_file(dir / "vessels.csv", other / "vessels.csv");
  args[6] = other.string();
  args.push_back("--threads");
  args.push_back("2");
  REQUIRE(run(args).code == 0);
  CHECK(slurp(dir / "draws_joint.csv") == slurp(other / "draws_joint.csv"));

  // chains this short do not pass the convergence checks
  std::vector<std::string> strict(args.begin(), args.end() - 2);
  strict.push_back("--strict");
  CHECK(run(strict).code == 1);
}

TEST_CASE("ML fit of the negative binomial model reports the Poisson comparison") {
  const auto dir = scratch("ml_nb");
  REQUIRE(run({"simulate", "--family", "lvd_negbin", "--seed", "4", "--out-dir", dir.string()}).code == 0);
  REQUIRE(run({"fit", "--family", "lvd_negbin", "--out-dir", dir.string()}).code == 0);
  const Json j = load_json(dir / "fit_lvd_negbin_ml.json");
  REQUIRE(j.contains("comparison"));
  const auto& c = j["comparison"];
  CHECK(c["delta_loglik"].get<double>() ==
        doctest::Approx(c["negbin_loglik"].get<double>() - c["poisson_loglik"].get<double>()));
}

TEST_CASE("recover writes per-parameter recovery rows") {
  const auto dir = scratch("recover");
  const auto r = run({"recover", "--family", "va_lmm", "--replicates", "2", "--method", "ml",
                      "--out-dir", dir.string()});
  REQUIRE(r.code == 0);
  std::istringstream csv(slurp(dir / "recover_parameters.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header == "parameter,truth,mean_estimate,bias,rmse,coverage,replicates");
  std::string line;
  int rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows >= 5);
}

TEST_CASE("power prints one row") {
  const auto r = run({"power", "--target", "0.9"});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header.rfind("groups,n_per_group,within_sd,alpha,difference_parameter", 0) == 0);
  CHECK(header.find("required_n") != std::string::npos);
  CHECK(row.rfind("3,25,7.5,0.05,0.50", 0) == 0);
  const auto dir = scratch("power");
  REQUIRE(run({"power", "--out-dir", dir.string()}).code == 0);
  const Json j = load_json(dir / "power.json");
  CHECK(j["power"].get<double>() > 0.88);
}
