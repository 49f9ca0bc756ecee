#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "config.hpp"
#include "experiments.hpp"
#include "table.hpp"

using namespace quasihom;
using namespace quasihom::cli;

namespace {

const std::filesystem::path kData = QUASIHOM_TEST_DATA;

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("quasihom_cli_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::vector<std::string> lines_of(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

PlotSpec plot_of(std::string title, std::vector<std::string> y, bool log_y = false) {
  PlotSpec spec;
  spec.title = std::move(title);
  spec.x = "n";
  spec.y = std::move(y);
  spec.log_y = log_y;
  return spec;
}

ResultTable sample_table() {
  ResultTable t({"n", "err"});
  t.add_row({0.0, 1.0});
  t.add_row({1.0, 0.1});
  t.add_row({2.0, 1e-3});
  return t;
}

}  // namespace

TEST(Cli, ConfigFile) {
  const auto dir = scratch("config");
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "run.cfg");
    out << "# comment line\nexperiment = compare-methods\n\nnfunc.p = 5   # trailing\nmesh.nc = 4\n";
  }
  const auto settings = read_config_file(dir / "run.cfg");
  EXPECT_EQ(settings.size(), 3u);
  EXPECT_EQ(settings.at("nfunc.p"), "5");
  RunConfig config;
  apply(config, settings);
  EXPECT_EQ(config.experiment, Experiment::kCompareMethods);
  EXPECT_EQ(config.problem.p, 5.0);
  EXPECT_EQ(config.problem.nc_x, 4);
  EXPECT_EQ(config.problem.nc_y, 4);
  {
    std::ofstream out(dir / "bad.cfg");
    out << "nfunc.p 5\n";
  }
  EXPECT_EQ(code_of([&] { read_config_file(dir / "bad.cfg"); }), ErrorCode::kConfigError);
  std::filesystem::remove_all(dir);
}

TEST(Cli, UnknownKeysAndValues) {
  RunConfig config;
  EXPECT_EQ(code_of([&] { apply(config, "solver.colour", "red"); }), ErrorCode::kConfigError);
  EXPECT_EQ(code_of([&] { apply(config, "nfunc.p", "five"); }), ErrorCode::kConfigError);
  EXPECT_EQ(code_of([&] { apply(config, "solver.method", "bfgs"); }), ErrorCode::kConfigError);
  EXPECT_EQ(code_of([] { parse_experiment("plot"); }), ErrorCode::kConfigError);
}

TEST(Cli, Validation) {
  RunConfig config;
  apply(config, "solver.space", "coarse");
  apply(config, "mesh.levels", "1");
  EXPECT_EQ(code_of([&] { config.validate(); }), ErrorCode::kConfigError);
  apply(config, "mesh.levels", "2");
  EXPECT_NO_THROW(config.validate());
  apply(config, "solver.method", "quasinorm");
  EXPECT_EQ(code_of([&] { config.validate(); }), ErrorCode::kConfigError);
  RunConfig p_low;
  apply(p_low, "nfunc.p", "1.5");
  EXPECT_EQ(code_of([&] { p_low.validate(); }), ErrorCode::kConfigError);
}

TEST(Cli, LayersAndFingerprint) {
  RunConfig config;
  EXPECT_EQ(resolve_layers(config, 8), 3);
  apply(config, "solver.layers", "global");
  EXPECT_EQ(resolve_layers(config, 8), kGlobalLayers);
  apply(config, "solver.layers", "5");
  EXPECT_EQ(resolve_layers(config, 8), 5);
  RunConfig other = config;
  EXPECT_EQ(config.fingerprint(), other.fingerprint());
  apply(other, "nfunc.p", "3");
  EXPECT_NE(config.fingerprint(), other.fingerprint());
  EXPECT_EQ(config.entries().at("solver.layers"), "5");
}

TEST(Cli, CsvRoundTripsDoubles) {
  ResultTable t({"a", "b"});
  t.add_row({0.1, 1.0 / 3.0});
  t.add_row({std::nan(""), -2.0});
  const std::string csv = to_csv(t);
  EXPECT_EQ(csv, "a,b\n0.10000000000000001,0.33333333333333331\nnan,-2\n");
  EXPECT_EQ(std::stod("0.33333333333333331"), 1.0 / 3.0);
  EXPECT_THROW(t.add_row({1.0}), Error);
}

TEST(Cli, CsvMetadata) {
  const auto dir = scratch("csv");
  ResultTable t = sample_table();
  t.metadata.emplace_back("seed", "7");
  write_csv(t, dir / "t.csv");
  EXPECT_EQ(lines_of(dir / "t.csv").size(), 4u);
  EXPECT_EQ(lines_of(dir / "t.csv.meta"), std::vector<std::string>{"seed=7"});
  std::filesystem::remove_all(dir);
}

TEST(Cli, SvgDeterministic) {
  const PlotSpec spec = plot_of("decay", {"err"}, true);
  const std::string a = render_svg(sample_table(), spec);
  EXPECT_EQ(a, render_svg(sample_table(), spec));
  EXPECT_EQ(a.rfind("<svg", 0), 0u);
  EXPECT_NE(a.find("<polyline"), std::string::npos);
  EXPECT_NE(a.find(">decay<"), std::string::npos);
  EXPECT_NE(a.find(">1e-3<"), std::string::npos);
}

TEST(Cli, SvgInvalidSelections) {
  const PlotSpec spec = plot_of("t", {"err"});
  EXPECT_EQ(code_of([&] { render_svg(ResultTable({"n", "err"}), spec); }), ErrorCode::kInvalidSelection);
  EXPECT_EQ(code_of([&] { render_svg(sample_table(), plot_of("t", {})); }), ErrorCode::kInvalidSelection);
  EXPECT_EQ(code_of([&] { render_svg(sample_table(), plot_of("t", {"missing"})); }), ErrorCode::kInvalidSelection);
  ResultTable zero = sample_table();
  zero.add_row({3.0, 0.0});
  EXPECT_EQ(code_of([&] { render_svg(zero, plot_of("t", {"err"}, true)); }), ErrorCode::kInvalidSelection);
}

TEST(Cli, SolveWritesIterations) {
  RunConfig config;
  apply(config, "mesh.nc", "4");
  apply(config, "mesh.levels", "2");
  apply(config, "solver.initial", "zero");
  config.out = scratch("solve");
  std::ostringstream log;
  EXPECT_EQ(run(config, log), 0);
  const auto rows = lines_of(config.out / "iterations.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "n,energy,energy_error,residual_l2h,alpha,rho,lambda,c_tilde,bases_updated,wall_time");
  EXPECT_TRUE(std::filesystem::exists(config.out / "summary.csv"));
  std::filesystem::remove_all(config.out);
}

TEST(Cli, ExitCodes) {
  RunConfig missing;
  apply(missing, "coeff.kind", "grid");
  apply(missing, "coeff.path", (kData / "missing.txt").string());
  apply(missing, "coeff.rows", "3");
  apply(missing, "coeff.cols", "4");
  missing.out = scratch("missing");
  std::ostringstream log;
  try {
    run(missing, log);
    FAIL() << "missing grid accepted";
  } catch (const Failure& f) {
    EXPECT_EQ(f.exit_code(), kExitData);
  }
  EXPECT_EQ(exit_code_for(Error(ErrorCode::kConfigError, "x")), kExitConfig);
  EXPECT_EQ(exit_code_for(Error(ErrorCode::kNonConvergence, "x")), kExitSolver);
}

TEST(Cli, GridCoefficientRun) {
  RunConfig config;
  apply(config, "coeff.kind", "grid");
  apply(config, "coeff.path", (kData / "toy_grid_4x3.txt").string());
  apply(config, "coeff.rows", "3");
  apply(config, "coeff.cols", "4");
  apply(config, "mesh.nc", "4");
  const CoefficientField field = make_field(config.problem);
  EXPECT_EQ(field(0.99, 0.99), 12.0);
}
