#include <filesystem>
#include <fstream>
#include <sstream>

#include "jmls/serialization.hpp"
#include "test_util.hpp"

using namespace jmls;
using jmls::test::MatrixNear;

namespace {

void expect_same_model(const JmlsModel& a, const JmlsModel& b, double tol) {
  ASSERT_EQ(a.m(), b.m());
  EXPECT_EQ(a.convention, b.convention);
  EXPECT_TRUE(MatrixNear(a.T, b.T, tol));
  for (std::size_t z = 0; z < a.m(); ++z) {
    EXPECT_TRUE(MatrixNear(a.modes[z].Gamma(), b.modes[z].Gamma(), tol));
    EXPECT_TRUE(MatrixNear(a.modes[z].Pi_half.matrix(), b.modes[z].Pi_half.matrix(), tol));
    ASSERT_EQ(a.prior.mode(z).size(), b.prior.mode(z).size());
    for (std::size_t i = 0; i < a.prior.mode(z).size(); ++i) {
      EXPECT_NEAR(a.prior.mode(z)[i].log_w, b.prior.mode(z)[i].log_w, tol);
      EXPECT_TRUE(MatrixNear(a.prior.mode(z)[i].mu, b.prior.mode(z)[i].mu, tol));
    }
  }
}

ErrorCode parse_error_code(const std::string& text) {
  try {
    model_from_json(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

}  // namespace

TEST(ModelJson, RoundTripIsExact) {
  const JmlsModel model = random_model(3, 2, 2, 3, 4, Convention::dynamic);
  expect_same_model(model_from_json(model_to_json(model)), model, 0.0);
  const JmlsModel classic = random_model(2, 1, 1, 2, 5, Convention::classic);
  expect_same_model(model_from_json(model_to_json(classic)), classic, 0.0);
}

TEST(ModelJson, GoldenExample1) {
  const JmlsModel loaded = load_model(std::filesystem::path(JMLS_DATA_DIR) / "example1.json");
  expect_same_model(loaded, test::example1_model(), 1e-15);
  EXPECT_TRUE(validate(loaded).empty());
}

TEST(ModelJson, CovarianceForm) {
  const std::string text = R"({"n_x":1,"n_u":1,"n_y":1,"m":1,"convention":"dynamic","T":[[1]],
    "modes":[{"A":[[0.5]],"B":[[1]],"C":[[2]],"D":[[0]],"Q":[[5]],"R":[[4]],"S":[[2]]}],
    "prior":{"modes":[[{"weight":1,"mean":[0],"P":[[9]]}]]}})";
  const JmlsModel m = model_from_json(text);
  Matrix F(2, 2);
  F << 2, 1, 0, 2;
  EXPECT_TRUE(MatrixNear(m.modes[0].Pi_half.matrix(), F, 1e-15));
  EXPECT_NEAR(m.prior.mode(0)[0].P_half.matrix()(0, 0), 3.0, 1e-15);
}

TEST(ModelJson, Errors) {
  EXPECT_EQ(parse_error_code("{not json"), ErrorCode::Parse);
  EXPECT_EQ(parse_error_code(R"({"n_x":1})"), ErrorCode::Parse);
  EXPECT_EQ(parse_error_code(R"({"n_x":1,"n_u":0,"n_y":1,"m":1,"T":[[1,2]],"modes":[],"prior":{}})"), ErrorCode::Parse);
  try {
    load_model("/nonexistent/model.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(DatasetCsv, RoundTripIsExact) {
  const Dataset d = simulate(random_model(2, 2, 1, 2, 8), InputSpec{}, 25, 3);
  std::stringstream ss;
  write_dataset_csv(ss, d);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "k,u1,u2,y1,z,x1,x2");
  const Dataset back = read_dataset_csv(ss);
  EXPECT_EQ(back.u, d.u);
  EXPECT_EQ(back.y, d.y);
  ASSERT_TRUE(back.z.has_value());
  EXPECT_EQ(*back.z, *d.z);
  EXPECT_EQ(*back.x, d.x->topRows(25));
}

TEST(DatasetCsv, ErrorsCarryLineNumbers) {
  std::stringstream bad("k,u1,y1\n1,0.5,1\n2,abc,3\n");
  try {
    read_dataset_csv(bad, "data.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Parse);
    EXPECT_NE(std::string(e.what()).find("data.csv:3"), std::string::npos) << e.what();
  }
  std::stringstream header("k,y2\n");
  EXPECT_THROW(read_dataset_csv(header), Error);
}

TEST(DatasetCsv, SeventeenDigits) { EXPECT_EQ(format_double(0.1), "0.10000000000000001"); }
