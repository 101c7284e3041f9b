#include <gtest/gtest.h>

#include "crowdnav/predictor.hpp"

using namespace crowdnav;

TEST(PredictCv, HandExtrapolation) {
  AgentState h;
  h.velocity = {1, 0};
  const auto pts = predict_cv(h, 5, 0.25);
  ASSERT_EQ(pts.size(), 5u);
  for (int k = 0; k < 5; ++k) {
    EXPECT_DOUBLE_EQ(pts[k].x, 0.25 * (k + 1));
    EXPECT_DOUBLE_EQ(pts[k].y, 0.0);
  }
}

TEST(PredictCv, ZeroVelocityStaysPut) {
  AgentState h;
  h.position = {1.5, -2};
  for (const Vec2& p : predict_cv(h, 4, 0.25)) EXPECT_EQ(p, h.position);
}

TEST(PredictCv, MirrorOfOppositeVelocity) {
  AgentState up, down;
  up.velocity = {0, 1};
  down.velocity = {0, -1};
  const auto a = predict_cv(up, 5, 0.25), b = predict_cv(down, 5, 0.25);
  for (int k = 0; k < 5; ++k) {
    EXPECT_DOUBLE_EQ(b[k].y, -0.25 * (k + 1));
    EXPECT_DOUBLE_EQ(a[k].y, -b[k].y);
  }
}

TEST(PredictCv, PrefixConsistent) {
  AgentState h;
  h.position = {0.3, 0.7};
  h.velocity = {-0.4, 1.1};
  const auto full = predict_cv(h, 5, 0.25);
  for (int kp = 1; kp <= 5; ++kp) {
    const auto part = predict_cv(h, kp, 0.25);
    for (int k = 0; k < kp; ++k) EXPECT_EQ(part[k], full[k]);
  }
}

TEST(PredictCv, InterfaceMatchesFreeFunction) {
  AgentState h;
  h.velocity = {0.2, 0.3};
  EXPECT_EQ(ConstantVelocityPredictor().predict(h, 5, 0.25), predict_cv(h, 5, 0.25));
}

TEST(PredictionError, Examples) {
  EXPECT_EQ(prediction_error({1, 2}, {1, 2}), 0.0);
  EXPECT_DOUBLE_EQ(prediction_error({0, 0}, {3, 4}), 5.0);
  EXPECT_EQ(prediction_error({0.1, 7}, {3, -4}), prediction_error({3, -4}, {0.1, 7}));
  const Vec2 off{5.0, -3.0};
  EXPECT_NEAR(prediction_error(Vec2{0.1, 7} + off, Vec2{3, -4} + off), prediction_error({0.1, 7}, {3, -4}), 1e-12);
}
