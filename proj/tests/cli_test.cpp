#include "sigchange/cli.hpp"
#include "sigchange/sigchange.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

namespace sigchange {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sigchange_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string exported(const std::string& name, std::vector<std::string> params = {}) {
    ExportArgs a;
    a.name = name;
    a.params = std::move(params);
    a.output.out = path(name + ".json");
    std::ostringstream out, err;
    EXPECT_EQ(cmd_export(a, out, err), kExitPass) << err.str();
    return a.output.out;
  }

  static std::string read(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path dir_;
};

TEST(SpaceFile, RoundTripsEveryCatalogSpace) {
  for (const auto& name : builtin_space_names()) {
    const auto s = builtin_space(name);
    const auto back = parse_space_json(space_to_json(s).dump());
    EXPECT_EQ(back.name, s.name);
    EXPECT_EQ(back.metric.alpha(), s.metric.alpha());
    EXPECT_EQ(back.metric.domain().bounds, s.metric.domain().bounds);
    for (std::size_t a = 0; a < s.metric.dim(); ++a) {
      for (std::size_t b = 0; b < s.metric.dim(); ++b) EXPECT_EQ(back.metric.entry(a, b), s.metric.entry(a, b)) << name;
    }
    ASSERT_EQ(back.fields.size(), s.fields.size());
    for (const auto& [key, f] : s.fields) {
      for (std::size_t i = 0; i < f.dim(); ++i) EXPECT_EQ(back.field(key).component(i), f.component(i));
    }
    EXPECT_EQ(back.sigma.has_value(), s.sigma.has_value());
    if (s.sigma) {
      EXPECT_EQ(*back.sigma, *s.sigma);
    }
  }
}

TEST(SpaceFile, MalformedJsonReportsOffset) {
  try {
    parse_space_json("{\"name\": \"x\",, }");
    FAIL() << "expected a syntax error";
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.offset(), 13u);
    EXPECT_NE(std::string(e.what()).find("offset 13"), std::string::npos);
  }
}

TEST(SpaceFile, SchemaErrors) {
  const std::string good =
      R"({"name": "k", "dim": 2, "alpha": 1, "domain": [[-1, 1], [-1, 1]],
          "metric": [["1", "0"], ["0", "-x2"]], "fields": {"rho": ["0", "1"]}, "sigma": "x2"})";
  EXPECT_NO_THROW(parse_space_json(good));
  auto with = [&](const std::string& from, const std::string& to) {
    std::string s = good;
    s.replace(s.find(from), from.size(), to);
    return s;
  };
  EXPECT_THROW(parse_space_json(with(R"("dim": 2)", R"("dim": 3)")), SchemaError);
  EXPECT_THROW(parse_space_json(with(R"("alpha": 1)", R"("alpha": "one")")), SchemaError);
  EXPECT_THROW(parse_space_json(with(R"("alpha": 1)", R"("alpha": 0)")), SchemaError);
  EXPECT_THROW(parse_space_json(with(R"(["1", "0"], ["0", "-x2"])", R"(["1", "x1"], ["0", "-x2"])")), SchemaError);
  EXPECT_THROW(parse_space_json(with(R"("-x2")", R"("-y")")), SchemaError);
  EXPECT_THROW(parse_space_json(with(R"("-x2")", R"("-x2 +")")), SchemaError);
  EXPECT_THROW(parse_space_json(with(R"(["0", "1"])", R"(["0"])")), SchemaError);
  EXPECT_THROW(parse_space_json(with(R"("sigma")", R"("sigmas")")), SchemaError);
  EXPECT_THROW(parse_space_json(with(R"("name": "k", )", "")), SchemaError);
  EXPECT_THROW(parse_space_json("[1, 2]"), SchemaError);
}

TEST_F(CliTest, CheckVerdicts) {
  std::ostringstream out, err;
  CheckArgs a;
  a.space = exported("kossowski");
  EXPECT_EQ(cmd_check(a, out, err), kExitPass) << out.str() << err.str();
  a.space = exported("discussion1");
  EXPECT_EQ(cmd_check(a, out, err), kExitVerdict);
  a.space = exported("esp", {"alpha=2"});
  EXPECT_EQ(cmd_check(a, out, err), kExitPass);
  a.alpha = 4.0;
  EXPECT_EQ(cmd_check(a, out, err), kExitVerdict);
}

TEST_F(CliTest, CheckJsonReport) {
  CheckArgs a;
  a.space = exported("discussion1");
  a.output.json = true;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_check(a, out, err), kExitVerdict);
  const json doc = json::parse(out.str());
  EXPECT_FALSE(doc["pass"].get<bool>());
  ASSERT_FALSE(doc["samples"].empty());
  for (const auto& s : doc["samples"]) {
    EXPECT_NEAR(s["left"].get<double>(), 3.0, 1e-3);
    EXPECT_NEAR(s["right"].get<double>(), 1.0, 1e-3);
    EXPECT_FALSE(s["extension_c1"].get<bool>());
  }
}

TEST_F(CliTest, MalformedSpaceIsUsageError) {
  const std::string p = path("bad.json");
  std::ofstream(p) << "{\"name\": \"bad\", \"dim\": 2,\n \"alpha\": }";
  CheckArgs a;
  a.space = p;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_check(a, out, err), kExitUsage);
  EXPECT_NE(err.str().find("offset"), std::string::npos) << err.str();
  a.space = path("missing.json");
  EXPECT_EQ(cmd_check(a, out, err), kExitUsage);
}

TEST_F(CliTest, Baldomero) {
  std::ostringstream out, err;
  BaldomeroArgs a;
  a.r = 1.0;
  a.psi = "1";
  a.output.json = true;
  EXPECT_EQ(cmd_baldomero(a, out, err), kExitPass) << err.str();
  const json doc = json::parse(out.str());
  EXPECT_NEAR(doc["f_prime_zero_estimate"].get<double>(), 0.707107, 1e-5);
  EXPECT_GE(doc["smoothness_verdict"].get<int>(), 3);

  a.r = 0.5;
  a.psi = "1+0.3*sin(x)";
  a.output = {false, path("b.csv")};
  out.str("");
  EXPECT_EQ(cmd_baldomero(a, out, err), kExitPass);
  EXPECT_NE(out.str().find("smoothness verdict: C^3"), std::string::npos) << out.str();
  std::istringstream csv(read(a.output.out));
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "t,F,dF,left_1,right_1,left_2,right_2,left_3,right_3");

  a.r = -1.0;
  EXPECT_EQ(cmd_baldomero(a, out, err), kExitUsage);
  a.r = 1.0;
  a.psi = "1 + y";
  EXPECT_EQ(cmd_baldomero(a, out, err), kExitUsage);
  a.psi = "1 + l1*x";
  a.lambda = {0.5};
  EXPECT_EQ(cmd_baldomero(a, out, err), kExitPass);
}

TEST_F(CliTest, Geodesic) {
  std::ostringstream out, err;
  GeodesicArgs a;
  a.space = exported("kossowski");
  a.start = {0.0, 0.5};
  a.velocity = {0.0, 1.0};
  a.tspan = {0.0, 0.4};
  a.output.out = path("g.csv");
  EXPECT_EQ(cmd_geodesic(a, out, err), kExitPass) << err.str();
  std::istringstream csv(read(a.output.out));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "t,x1,x2,v1,v2,speed2,residual");
  int rows = 0;
  while (std::getline(csv, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 6);
  }
  EXPECT_EQ(rows, 101);

  a.space = exported("euclidean");
  a.start = {0.1, 0.2};
  a.velocity = {0.3, -0.5};
  a.output = {true, ""};
  out.str("");
  EXPECT_EQ(cmd_geodesic(a, out, err), kExitPass);
  EXPECT_LE(json::parse(out.str())["max_residual"].get<double>(), 1e-12);

  a.space = exported("kossowski");
  a.start = {0.0, 0.0};
  out.str("");
  EXPECT_EQ(cmd_geodesic(a, out, err), kExitVerdict);
  EXPECT_EQ(json::parse(out.str())["status"], "halted_near_sigma");
  a.start = {0.0};
  EXPECT_EQ(cmd_geodesic(a, out, err), kExitUsage);
}

TEST_F(CliTest, Normalize) {
  std::ostringstream out, err;
  NormalizeArgs a;
  a.space = exported("normal_form");
  a.output.out = path("chart.json");
  EXPECT_EQ(cmd_normalize(a, out, err), kExitPass) << err.str();
  const json doc = json::parse(read(a.output.out));
  EXPECT_TRUE(doc["report"]["pass"].get<bool>());
  for (const auto& row : doc["psi"]) {
    for (const auto& v : row) EXPECT_NEAR(v.get<double>(), 1.0, 1e-12);
  }

  a.space = exported("distorted_normal", {"alpha=0.5", "amplitude=0.1", "seed=2"});
  a.output = {false, ""};
  EXPECT_EQ(cmd_normalize(a, out, err), kExitPass) << out.str();

  a.space = exported("discussion1");
  EXPECT_EQ(cmd_normalize(a, out, err), kExitVerdict);

  a.space = exported("esp", {"hbar=1 + 0.5*x1"});
  err.str("");
  EXPECT_EQ(cmd_normalize(a, out, err), kExitVerdict);
  EXPECT_NE(err.str().find("not a geodesic"), std::string::npos) << err.str();

  a.field = "xi";
  EXPECT_EQ(cmd_normalize(a, out, err), kExitUsage);
}

TEST_F(CliTest, ExportErrors) {
  std::ostringstream out, err;
  ExportArgs a;
  a.name = "nowhere";
  EXPECT_EQ(cmd_export(a, out, err), kExitUsage);
  a.name = "kossowski";
  a.params = {"m"};
  EXPECT_EQ(cmd_export(a, out, err), kExitUsage);
  a.params = {"m=3"};
  EXPECT_EQ(cmd_export(a, out, err), kExitPass);
  EXPECT_EQ(json::parse(out.str())["dim"], 3);
}

TEST_F(CliTest, RepeatedRunsAreIdentical) {
  auto run = [&](const std::string& tag) {
    GeodesicArgs g;
    g.space = exported("distorted_normal", {"seed=5", "amplitude=0.2"});
    g.start = {0.2, 0.4};
    g.velocity = {0.1, 0.5};
    g.tspan = {0.0, 0.5};
    g.output.out = path("trace_" + tag + ".csv");
    std::ostringstream out, err;
    cmd_geodesic(g, out, err);
    NormalizeArgs n;
    n.space = g.space;
    n.output.out = path("chart_" + tag + ".json");
    cmd_normalize(n, out, err);
    return read(g.output.out) + read(n.output.out) + out.str();
  };
  const std::string first = run("a");
  EXPECT_FALSE(first.empty());
  EXPECT_EQ(first, run("b"));
}

}  // namespace
}  // namespace sigchange
