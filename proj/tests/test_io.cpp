#include "circspec/io.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace circspec;
using circspec::testing::vec;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "circspec_test_io";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Json, TrigPolynomialRoundTripIsExact) {
  std::mt19937_64 rng(21);
  const auto g = circspec::testing::random_trig(rng, 3, 5);
  const auto back = io::trig_from_json(io::parse_json(io::dump(io::to_json(g))));
  ASSERT_EQ(back.size(), g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    EXPECT_EQ(back.modes()[k].omega, g.modes()[k].omega);
    EXPECT_EQ(back.modes()[k].coeff, g.modes()[k].coeff);
  }
}

TEST(Json, ImaginaryPartIsOptional) {
  const auto g = io::trig_from_json(io::parse_json(R"({"dim": 2, "modes": [{"omega": 1.5, "re": [1, 2]}]})"));
  EXPECT_EQ(g.modes()[0].coeff, vec({1.0, 2.0}));
}

TEST(Json, MalformedInputsAreParseErrors) {
  EXPECT_EQ(code_of([] { io::parse_json("{\"dim\": "); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { io::trig_from_json(io::parse_json(R"({"modes": []})")); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { io::trig_from_json(io::parse_json(R"({"dim": 2, "modes": [{"omega": 0, "re": [1]}]})")); }),
            ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { io::trig_from_json(io::parse_json(R"({"dim": 1, "modes": [{"omega": "x", "re": [1]}]})")); }),
            ErrorCode::ParseError);
}

TEST(Json, DumpFormatting) {
  io::Json j{{"b", 0.1}, {"a", 2.0}, {"inf", io::num(INFINITY)}, {"n", 3}, {"list", {1.5, 2.0}}};
  EXPECT_EQ(io::dump(j),
            "{\n  \"b\": 0.10000000000000001,\n  \"a\": 2.0,\n  \"inf\": \"inf\",\n  \"n\": 3,\n"
            "  \"list\": [1.5, 2.0]\n}\n");
  EXPECT_EQ(io::dump(j), io::dump(io::parse_json(io::dump(j))));
}

TEST(Csv, GridRoundTripIsExact) {
  std::vector<CVector> s;
  for (int i = 0; i < 50; ++i) s.push_back(vec({std::sin(0.1 * i), cplx(0.3, -std::cos(0.2 * i))}));
  const GridFunction g(-1.0, 0.125, s);
  const auto back = io::grid_from_csv(io::to_csv(g));
  ASSERT_EQ(back.size(), g.size());
  EXPECT_EQ(back.t0(), g.t0());
  EXPECT_NEAR(back.dt(), g.dt(), 1e-15);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(back.sample(i), g.sample(i));
}

TEST(Csv, ToleratesCommentsAndWhitespace) {
  const auto g = io::grid_from_csv("# produced by hand\n t re_0 im_0\n0  1 0\n\n0.5\t2 0 # tail\n1.0, 3, 0\n");
  ASSERT_EQ(g.size(), 3u);
  EXPECT_DOUBLE_EQ(g.dt(), 0.5);
  EXPECT_EQ(g.sample(2)(0), cplx(3.0, 0.0));
}

TEST(Csv, RejectsBadGrids) {
  EXPECT_EQ(code_of([] { io::grid_from_csv("t,re_0,im_0\n0,1,0\n0.5,1,0\n1.2,1,0\n"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { io::grid_from_csv("t,re_0,im_0\n0,1,0\n0.5,1,0,2,0\n"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { io::grid_from_csv("t,re_0,im_0\n1,1,0\n0,1,0\n"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { io::grid_from_csv("t,re_0\n0,1\n1,1\n"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { io::grid_from_csv("0,1,0\n"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { io::grid_from_csv("0,1,0\nbad,row,here\n1,1,0\n"); }), ErrorCode::ParseError);
}

TEST(Csv, SeriesSamplesTheFunction) {
  const auto f = TrigPolynomial::single(1.0, vec({1.0}));
  const auto g = io::grid_from_csv(io::series_csv(f, 1, {0.0, 2.0}, 0.25));
  ASSERT_EQ(g.size(), 9u);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_LT((g.sample(i) - f(g.time(i))).norm(), 1e-15);
}

TEST(SystemJson, ConstantRoundTrip) {
  const auto sys = io::system_from_json(io::parse_json(R"({"dim": 2, "kind": "constant",
      "constant": [[-1, 0.5], [0, -2]], "constant_im": [[0, 0], [1, 0]], "integ": {"rtol": 1e-10}})"));
  EXPECT_EQ(sys.kind(), SystemKind::constant);
  EXPECT_EQ(sys.constant_matrix()(1, 0), cplx(0.0, 1.0));
  EXPECT_EQ(sys.integ().rtol, 1e-10);
  const auto back = io::system_from_json(io::parse_json(io::dump(io::to_json(sys))));
  EXPECT_EQ(back.constant_matrix(), sys.constant_matrix());
}

TEST(SystemJson, GeneralAndHeatRoundTrip) {
  const auto gen = io::system_from_json(io::parse_json(R"({"dim": 2, "kind": "general", "entries": [
      {"row": 0, "col": 0, "modes": [{"omega": 0, "re": -1, "im": 0}, {"omega": 6.283185307179586, "re": 0.2, "im": 0.1}]},
      {"row": 1, "col": 1, "modes": [{"omega": 0, "re": -0.5}]}]})"));
  const auto gen2 = io::system_from_json(io::parse_json(io::dump(io::to_json(gen))));
  for (double t : {0.0, 0.3, 0.71}) EXPECT_LT((gen.A(t) - gen2.A(t)).norm(), 1e-15);

  const auto heat = io::system_from_json(io::parse_json(R"({"kind": "heat", "heat": {"n_modes": 3,
      "a": {"dim": 1, "modes": [{"omega": 0, "re": [-1]}]}, "b": {"dim": 1, "modes": [{"omega": 0, "re": [1]}]}}})"));
  EXPECT_EQ(heat.dim(), 3);
  const auto heat2 = io::system_from_json(io::parse_json(io::dump(io::to_json(heat))));
  EXPECT_LT((heat.A(0.4) - heat2.A(0.4)).norm(), 1e-15);
}

TEST(SystemJson, PeriodRescalesEntries) {
  const auto j = io::parse_json(R"({"kind": "constant", "constant": [[-1]]})");
  const auto sys = io::system_from_json(j, 2.0);
  EXPECT_EQ(sys.constant_matrix()(0, 0), cplx(-2.0, 0.0));
  EXPECT_EQ(sys.period(), 2.0);
}

TEST(SystemJson, Errors) {
  EXPECT_EQ(code_of([] { io::system_from_json(io::parse_json(R"({"kind": "magic"})")); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { io::system_from_json(io::parse_json(R"({"kind": "constant", "constant": [[1, 2]]})")); }),
            ErrorCode::ParseError);
  EXPECT_EQ(code_of([] {
              io::system_from_json(io::parse_json(R"({"dim": 1, "kind": "general", "entries": [
                {"row": 0, "col": 0, "modes": [{"omega": 1.0, "re": 1}]}]})"));
            }),
            ErrorCode::InvalidArgument);
}

TEST(NonlinearityJson, PolynomialWithOverride) {
  const auto sys = PeriodicSystem::constant(CMatrix::Constant(1, 1, -1.0));
  const auto h = io::nonlinearity_from_json(
      io::parse_json(R"({"kind": "polynomial", "terms": [{"power": 2, "coeff": {"dim": 1, "modes": [{"omega": 0, "re": [3]}]}}],
                         "lip": {"poly_coeffs": [0.5, 7]}})"),
      sys);
  EXPECT_EQ(h.kind(), NonlinearityKind::polynomial);
  EXPECT_NEAR(std::abs(h.eval(0.2, vec({2.0}))(0) - 12.0), 0.0, 1e-14);
  EXPECT_DOUBLE_EQ(h.lip(1.0), 7.5);
  EXPECT_EQ(code_of([&] { io::nonlinearity_from_json(io::parse_json(R"({"kind": "cubic"})"), sys); }),
            ErrorCode::ParseError);
}

TEST(NonlinearityJson, HeatQuadraticNeedsHeatSystem) {
  const auto sys = PeriodicSystem::constant(CMatrix::Constant(1, 1, -1.0));
  EXPECT_EQ(code_of([&] { io::nonlinearity_from_json(io::parse_json(R"({"kind": "heat_quadratic"})"), sys); }),
            ErrorCode::InvalidArgument);
}

TEST(Files, AtomicWriteLeavesNoTemporary) {
  const auto p = scratch("atomic.json");
  io::write_atomic(p, "first\n");
  io::write_atomic(p, "second\n");
  EXPECT_EQ(io::read_file(p), "second\n");
  auto tmp = p;
  tmp += ".tmp";
  EXPECT_FALSE(std::filesystem::exists(tmp));
  EXPECT_EQ(code_of([] { io::read_file(scratch("missing.json")); }), ErrorCode::InvalidArgument);
}

TEST(Files, LoadFunctionDetectsFormat) {
  const auto pj = scratch("f.json"), pc = scratch("f.csv");
  io::write_atomic(pj, R"({"dim": 1, "modes": [{"omega": 1, "re": [1]}]})");
  io::write_atomic(pc, "t,re_0,im_0\n0,1,0\n1,1,0\n");
  EXPECT_TRUE(io::load_function(pj).trig.has_value());
  EXPECT_TRUE(io::load_function(pc).grid.has_value());
}
