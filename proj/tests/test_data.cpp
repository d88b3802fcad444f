#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "freqchoice/csv.hpp"
#include "freqchoice/data.hpp"

using namespace freqchoice;

namespace {

ModelSpec base_spec() {
  ModelSpec s;
  s.family = Family::oev_gamma;
  s.top_code = 3;
  s.index_covariates = {{"income", Transform::natural_log},
                        {"age", Transform::identity}};
  return s;
}

}  // namespace

TEST_CASE("csv reader handles quoting, CRLF, and embedded separators") {
  std::istringstream in(
      "a,b,c\r\n"
      "1,\"two, three\",\"he said \"\"hi\"\"\"\n"
      "4,,6\n");
  const auto table = csv::read(in);
  REQUIRE(table.header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0][1] == "two, three");
  CHECK(table.rows[0][2] == "he said \"hi\"");
  CHECK(table.rows[1][1].empty());
}

TEST_CASE("csv reader rejects unterminated quotes") {
  std::istringstream in("a\n\"oops\n");
  CHECK_THROWS_AS(csv::read(in), DataError);
}

TEST_CASE("format_double round-trips through parse_double exactly") {
  for (double x : {0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0, -0.0, 123456.789}) {
    bool ok = false;
    const double back = csv::parse_double(csv::format_double(x), ok);
    REQUIRE(ok);
    CHECK(back == x);
  }
}

TEST_CASE("validate_spec counts free parameters per family") {
  SECTION("ordered") {
    auto s = validate_spec(base_spec());
    CHECK(s.free_parameter_count == 2 + 3 + 1);  // beta, thresholds, sigma2
  }
  SECTION("split") {
    auto s = base_spec();
    s.family = Family::split_oev_gamma;
    s.split_intercept = true;
    s.split_covariates = {{"age", Transform::identity}};
    s = validate_spec(s);
    CHECK(s.free_parameter_count == 2 + 2 + 1 + 2);
  }
  SECTION("nb") {
    auto s = base_spec();
    s.family = Family::nb_ogev;
    s.count_specific_terms = {{0, kConstColumn, Transform::identity}};
    s.rho_intercept = true;
    s = validate_spec(s);
    CHECK(s.free_parameter_count == 2 + 1 + 1 + 1);
  }
  SECTION("poisson with fixed rho") {
    auto s = base_spec();
    s.family = Family::poisson_ogev;
    s = validate_spec(s);
    CHECK(s.free_parameter_count == 2);
  }
}

TEST_CASE("validate_spec rejects malformed specifications") {
  SECTION("empty index") {
    auto s = base_spec();
    s.index_covariates.clear();
    CHECK_THROWS_AS(validate_spec(s), SpecError);
  }
  SECTION("top_code below one") {
    auto s = base_spec();
    s.top_code = 0;
    CHECK_THROWS_AS(validate_spec(s), SpecError);
  }
  SECTION("split fields on a non-split family") {
    auto s = base_spec();
    s.split_intercept = true;
    CHECK_THROWS_AS(validate_spec(s), SpecError);
  }
  SECTION("split family without any hurdle covariate") {
    auto s = base_spec();
    s.family = Family::split_oev_gamma;
    CHECK_THROWS_AS(validate_spec(s), SpecError);
  }
  SECTION("count fields on an ordered family") {
    auto s = base_spec();
    s.count_specific_terms = {{1, "age", Transform::identity}};
    CHECK_THROWS_AS(validate_spec(s), SpecError);
  }
  SECTION("count term level out of range") {
    auto s = base_spec();
    s.family = Family::nb_ogev;
    s.count_specific_terms = {{4, "age", Transform::identity}};
    CHECK_THROWS_AS(validate_spec(s), SpecError);
  }
  SECTION("constant shifts on every level are unidentified") {
    auto s = base_spec();
    s.family = Family::nb_ogev;
    for (int level = 0; level <= 3; ++level) {
      s.count_specific_terms.push_back({level, kConstColumn, Transform::identity});
    }
    CHECK_THROWS_AS(validate_spec(s), SpecError);
  }
  SECTION("duplicate covariate in one list") {
    auto s = base_spec();
    s.index_covariates.push_back({"income", Transform::natural_log});
    CHECK_THROWS_AS(validate_spec(s), SpecError);
  }
  SECTION("conflicting transforms for one column") {
    auto s = base_spec();
    s.family = Family::split_oev_gamma;
    s.split_intercept = true;
    s.split_covariates = {{"income", Transform::identity}};
    CHECK_THROWS_AS(validate_spec(s), SpecError);
  }
  SECTION("log of the intercept column") {
    auto s = base_spec();
    s.index_covariates[1] = {kConstColumn, Transform::natural_log};
    CHECK_THROWS_AS(validate_spec(s), SpecError);
  }
  SECTION("freq used as a covariate") {
    auto s = base_spec();
    s.index_covariates[1] = {"freq", Transform::identity};
    CHECK_THROWS_AS(validate_spec(s), SpecError);
  }
}

TEST_CASE("load_dataset applies transforms and validates frequencies") {
  const auto spec = validate_spec(base_spec());
  std::istringstream in(
      "freq,income,age,unused\n"
      "0,1000,30,x\n"
      "3,2000,40,y\n");
  const auto ds = load_dataset(in, spec);
  REQUIRE(ds.n() == 2);
  const auto j = ds.column_index("income");
  REQUIRE(j.has_value());
  CHECK(ds.column(*j)[0] == Catch::Approx(std::log(1000.0)));
  CHECK(ds.column(*j)[1] == Catch::Approx(std::log(2000.0)));
  const auto ja = ds.column_index("age");
  CHECK(ds.column(*ja)[1] == 40.0);
  CHECK(ds.freq() == std::vector<int>{0, 3});
  CHECK_FALSE(ds.column_index("unused").has_value());
}

TEST_CASE("load_dataset reports data errors with 1-based row numbers") {
  const auto spec = validate_spec(base_spec());
  SECTION("missing freq column") {
    std::istringstream in("income,age\n1,2\n");
    CHECK_THROWS_WITH(load_dataset(in, spec),
                      Catch::Matchers::ContainsSubstring("freq"));
  }
  SECTION("missing spec column") {
    std::istringstream in("freq,age\n1,2\n");
    CHECK_THROWS_WITH(load_dataset(in, spec),
                      Catch::Matchers::ContainsSubstring("income"));
  }
  SECTION("non-numeric cell") {
    std::istringstream in("freq,income,age\n1,1000,30\n2,oops,40\n");
    CHECK_THROWS_WITH(load_dataset(in, spec),
                      Catch::Matchers::ContainsSubstring("row 2"));
  }
  SECTION("fractional freq") {
    std::istringstream in("freq,income,age\n1.5,1000,30\n");
    CHECK_THROWS_AS(load_dataset(in, spec), DataError);
  }
  SECTION("freq above top_code") {
    std::istringstream in("freq,income,age\n4,1000,30\n");
    CHECK_THROWS_WITH(load_dataset(in, spec),
                      Catch::Matchers::ContainsSubstring("top_code"));
  }
  SECTION("negative freq") {
    std::istringstream in("freq,income,age\n-1,1000,30\n");
    CHECK_THROWS_AS(load_dataset(in, spec), DataError);
  }
  SECTION("log of a non-positive value") {
    std::istringstream in("freq,income,age\n1,0,30\n");
    CHECK_THROWS_WITH(load_dataset(in, spec),
                      Catch::Matchers::ContainsSubstring("row 1"));
  }
}

TEST_CASE("dataset csv writer round-trips bit-exactly") {
  ModelSpec spec = base_spec();
  spec.index_covariates = {{"income", Transform::identity},
                           {"age", Transform::identity}};
  spec = validate_spec(spec);
  const Dataset ds({"income", "age"}, {0, 2, 3},
                   {{0.1, -1.0 / 3.0, 1e-17}, {30.0, 40.5, 50.25}});
  std::ostringstream out;
  write_dataset_csv(ds, out);
  std::istringstream in(out.str());
  const auto back = load_dataset(in, spec);
  REQUIRE(back.n() == 3);
  CHECK(back.freq() == ds.freq());
  for (std::size_t j = 0; j < 2; ++j) {
    const auto jj = back.column_index(ds.column_names()[j]);
    REQUIRE(jj.has_value());
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(back.column(*jj)[i] == ds.column(j)[i]);
    }
  }
}

TEST_CASE("observation-based construction checks key consistency") {
  std::vector<Observation> obs(2);
  obs[0].freq = 1;
  obs[0].covariates = {{"a", 1.0}, {"b", 2.0}};
  obs[1].freq = 2;
  obs[1].covariates = {{"a", 3.0}};
  CHECK_THROWS_AS(Dataset(obs), DataError);
  obs[1].covariates["b"] = 4.0;
  const Dataset ds(obs);
  CHECK(ds.n() == 2);
  CHECK(ds.observation(1).covariates.at("b") == 4.0);
}
