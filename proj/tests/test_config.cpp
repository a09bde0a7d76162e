#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "toomdtc/config.hpp"

using namespace toomdtc;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

int line_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST(Config, MinimalConfigGetsDefaults) {
  const auto c = parse_config("engine = \"langevin\"\n[lattice]\nwidth = 32\nheight = 24\n");
  EXPECT_EQ(c.engine, Engine::langevin);
  EXPECT_EQ(c.width, 32);
  EXPECT_EQ(c.height, 24);
  EXPECT_EQ(c.floquet.v, 50.0);
  EXPECT_EQ(c.floquet.F, 1e-4);
  EXPECT_EQ(c.floquet.dt, 1e-3);
  EXPECT_EQ(c.floquet.kappa_f, 1.0);
  EXPECT_EQ(c.floquet.mass, 0.5);
  EXPECT_EQ(c.floquet.T, 0.0);
  EXPECT_EQ(c.floquet.step2_rule, "TOOM");
  EXPECT_EQ(c.floquet.step4_rule, "PI_TOOM");
  EXPECT_EQ(c.scenario.window_start, 750);
  EXPECT_EQ(c.scenario.window_cycles, 500);
  EXPECT_EQ(c.scenario.realizations, 50);
}

TEST(Config, EmptyTextIsValid) { EXPECT_EQ(parse_config(""), RunConfig{}); }

TEST(Config, NegativeTemperatureRejected) {
  const auto msg = error_of("[floquet]\nT = -1.0\n");
  EXPECT_NE(msg.find("floquet.T"), std::string::npos) << msg;
}

TEST(Config, ValidationNamesTheKey) {
  EXPECT_NE(error_of("[lattice]\nwidth = 0\n").find("lattice.width"), std::string::npos);
  EXPECT_NE(error_of("[floquet]\ndt = 0.3\n").find("floquet.dt"), std::string::npos);
  EXPECT_NE(error_of("[pca]\nrules = [\"TOOM\", \"LIFE\"]\n").find("pca.rules"), std::string::npos);
  EXPECT_NE(error_of("[scenario]\ncycles = 100\nwindow_start = 90\nwindow_cycles = 20\n").find("scenario.window_cycles"),
            std::string::npos);
  EXPECT_NE(error_of("[pca]\neps_plus = 0.7\neps_minus = 0.6\n").find("pca.eps_plus"), std::string::npos);
}

TEST(Config, UnknownKeysFailClosed) {
  const std::string text = "engine = \"pca\"\n\n[floquet]\nv = 100.0\ntemprature = 3.0\n";
  EXPECT_NE(error_of(text).find("floquet.temprature"), std::string::npos);
  EXPECT_EQ(line_of(text), 5);
  EXPECT_NE(error_of("[output]\nx = 1\n").find("unknown table [output]"), std::string::npos);
  EXPECT_EQ(line_of("[output]\nx = 1\n"), 2);
  EXPECT_NE(error_of("sed = 3\n").find("unknown key 'sed'"), std::string::npos);
}

TEST(Config, ParseErrorsCarryLineNumbers) {
  EXPECT_EQ(line_of("seed = 1\n# comment\n[lattice]\nwidth = = 3\n"), 4);
  EXPECT_EQ(line_of("out = \"unterminated\n"), 1);
  EXPECT_EQ(line_of("[lattice\n"), 1);
  EXPECT_EQ(line_of("seed = 1\nseed = 2\n"), 2);
  EXPECT_EQ(line_of("[pca]\nrules = [\"TOOM\",\n"), 2);
}

TEST(Config, TypeErrors) {
  EXPECT_NE(error_of("[lattice]\nwidth = \"wide\"\n").find("lattice.width"), std::string::npos);
  EXPECT_NE(error_of("[lattice]\nwidth = 3.5\n").find("an integer"), std::string::npos);
  EXPECT_NE(error_of("[floquet]\nv = true\n").find("a number"), std::string::npos);
  EXPECT_NE(error_of("engine = \"gpu\"\n").find("engine"), std::string::npos);
  EXPECT_NE(error_of("seed = -4\n").find("seed"), std::string::npos);
  // integers are accepted where reals are expected
  EXPECT_EQ(parse_config("[floquet]\nv = 100\n").floquet.v, 100.0);
}

TEST(Config, CommentsAndStrings) {
  const auto c = parse_config("out = \"runs/a # b\" # trailing\n# full line\n  seed = 12  \n");
  EXPECT_EQ(c.out, "runs/a # b");
  EXPECT_EQ(c.seed, 12u);
  EXPECT_EQ(parse_config("out = \"tab\\tquote\\\"\"\n").out, "tab\tquote\"");
}

TEST(Config, RoundTrip) {
  RunConfig c;
  c.engine = Engine::pca;
  c.seed = std::numeric_limits<std::uint64_t>::max() - 5;
  c.out = "dir with \"quotes\" and \\slashes";
  c.threads = 3;
  c.width = 20;
  c.height = 12;
  c.floquet.v = 100.0;
  c.floquet.T = 5.17;
  c.floquet.F = 1e-4;
  c.floquet.kappa_f = 0.1 + 0.2;
  c.floquet.dt = 1.0 / 4096.0;
  c.floquet.mass = 1.0 / 3.0;
  c.floquet.step2_rule = "DO_NOTHING";
  c.pca_rules = {"PI_TOOM"};
  c.eps_plus = 0.0123456789012345;
  c.eps_minus = 1e-300;
  c.scenario.temperatures = {5.17, 11.94, 1e-7};
  c.scenario.box_sizes = {2, 4};
  c.scenario.initial.kind = InitialKind::stripes;
  c.scenario.initial.stripe_period = 5;
  c.scenario.initial.stripe_width = 2;
  c.validate();
  const auto text = to_toml(c);
  const auto back = parse_config(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(to_toml(back), text);
  EXPECT_EQ(parse_config(to_toml(RunConfig{})), RunConfig{});
}

TEST(Config, SeedAboveSignedRange) {
  RunConfig c;
  c.seed = 18'000'000'000'000'000'000ull;
  EXPECT_NE(to_toml(c).find("seed = \"18000000000000000000\""), std::string::npos);
  EXPECT_EQ(parse_config(to_toml(c)).seed, c.seed);
}

TEST(Config, QuickTier) {
  RunConfig c;
  c.apply_quick();
  EXPECT_EQ(c.tier, Tier::quick);
  EXPECT_EQ(c.width, 16);
  EXPECT_EQ(c.height, 16);
  EXPECT_EQ(c.scenario.realizations, 10);
  EXPECT_EQ(c.scenario.window_start, 100);  // t = 400
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "toomdtc_test_config.toml";
  {
    std::ofstream out(path);
    out << "seed = 99\n[floquet]\nT = 2.0\n";
  }
  const auto c = load_config(path.string());
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.floquet.T, 2.0);
  std::filesystem::remove(path);
  EXPECT_THROW(load_config(path.string()), ConfigError);
}

TEST(FormatReal, ShortestRoundTrip) {
  EXPECT_EQ(format_real(0.1), "0.1");
  EXPECT_EQ(format_real(5.17), "5.17");
  EXPECT_EQ(format_real(1e-4), "1e-04");
  for (double x : {0.1 + 0.2, 1.0 / 3.0, 6.02214076e23, -4.9e-300})
    EXPECT_EQ(std::stod(format_real(x)), x);
  EXPECT_EQ(format_real(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_real(std::nan("")), "nan");
}
