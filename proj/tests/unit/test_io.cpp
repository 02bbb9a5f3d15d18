#include <sstream>

#include "doctest.h"
#include "fdsel/error.hpp"
#include "fdsel/io.hpp"
#include "fdsel/simulate.hpp"

using namespace fdsel;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidConfig;
}

}  // namespace

TEST_CASE("long csv round trip") {
  ScenarioConfig sc;
  sc.n = 4;
  sc.m = 15;
  sc.sampling = Sampling::Partial;
  sc.seed = 19;
  const auto data = simulate(sc).dataset;
  std::stringstream ss;
  write_long_csv(ss, data);
  const auto back = read_long_csv(ss);
  REQUIRE(back.n() == data.n());
  CHECK(back.grid() == data.grid());
  CHECK(back.groups() == data.groups());
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto& a = data.curves()[i];
    const auto& b = back.curves()[i];
    CHECK(a.curve_id == b.curve_id);
    CHECK(a.mask == b.mask);
    for (std::size_t j = 0; j < 15; ++j)
      if (a.mask[j]) CHECK(a.values[j] == b.values[j]);
  }
}

TEST_CASE("long csv parsing") {
  std::istringstream in(
      "t,value,group,curve_id,order\n"
      "0,1.5,A,x,0\n0.5,2,A,x,0\n1,,A,x,0\n0.5,9,A,x,1\n"
      "0,3,B,y,0\n0.5,NA,B,y,0\n1,4,B,y,0\n");
  const auto d = read_long_csv(in);
  CHECK(d.n() == 2);
  CHECK(d.m() == 3);
  CHECK(d.curves()[0].values[1] == 2);
  CHECK(d.curves()[0].mask == Mask{1, 1, 0});
  CHECK(d.curves()[1].mask == Mask{1, 0, 1});

  std::istringstream dup("curve_id,group,t,value\nx,A,0,1\nx,A,0.5,1\nx,A,1,1\nx,A,0,2\n");
  CHECK(code_of([&] { read_long_csv(dup); }) == ErrorCode::ParseError);
  std::istringstream two("curve_id,group,t,value\nx,A,0,1\nx,A,0.5,1\nx,B,1,2\n");
  CHECK(code_of([&] { read_long_csv(two); }) == ErrorCode::ParseError);
  std::istringstream missing("curve_id,t,value\nx,0,1\n");
  CHECK(code_of([&] { read_long_csv(missing); }) == ErrorCode::ParseError);
}

TEST_CASE("smoothed csv round trip") {
  ScenarioConfig sc;
  sc.n = 4;
  sc.m = 20;
  sc.sampling = Sampling::Partial;
  const auto data = validate_dataset(simulate(sc).dataset);
  const auto s = presmooth(data, {});
  std::stringstream ss;
  write_smoothed_csv(ss, data, s);
  const auto back = read_smoothed_csv(ss);
  REQUIRE(back.orders.size() == 2);
  CHECK(back.labels == s.labels);
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t i = 0; i < s.n(); ++i) {
      CHECK(back.orders[l].masks[i] == s.orders[l].masks[i]);
      for (std::size_t j = 0; j < 20; ++j)
        if (s.orders[l].masks[i][j]) CHECK(back.orders[l].values[i][j] == s.orders[l].values[i][j]);
    }
}

TEST_CASE("config json round trips") {
  ScenarioConfig sc;
  sc.sigma_e = 3;
  sc.scenario = Scenario::LocalOutlier;
  sc.shape.preset = "cross-over";
  const auto back = scenario_from_json(to_json(sc));
  CHECK(back.sigma_e == 3);
  CHECK(back.scenario == Scenario::LocalOutlier);
  CHECK(back.shape.preset == "cross-over");

  AnalysisConfig a;
  a.iwt.B = 321;
  a.iwt.correction = Correction::Holm;
  a.mestimator.delta = 1.3;
  a.presmooth.max_order = 0;
  AnalysisConfig b;
  update_from_json(b, to_json(a));
  CHECK(b.iwt.B == 321);
  CHECK(b.iwt.correction == Correction::Holm);
  CHECK(b.mestimator.delta == 1.3);
  CHECK(b.presmooth.max_order == 0);
  CHECK(to_json(a) == to_json(b));
}
