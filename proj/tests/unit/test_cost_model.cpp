#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "otcloak/cost_model.hpp"
#include "otcloak/errors.hpp"

namespace otcloak {
namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

OtGeometry random_geometry(std::size_t in, std::size_t hid, std::size_t emb, std::uint64_t seed) {
  OtGeometry g = init_geometry(in, hid, emb, seed);
  std::mt19937_64 rng(seed + 100);
  std::normal_distribution<double> d(0.0, 0.4);
  for (auto& x : g.b1) x = d(rng);
  for (auto& x : g.b2) x = d(rng);
  for (auto& x : g.l.values()) x += d(rng);
  return g;
}

std::vector<double*> parameters(OtGeometry& g) {
  std::vector<double*> out;
  for (auto& x : g.w1.values()) out.push_back(&x);
  for (auto& x : g.b1) out.push_back(&x);
  for (auto& x : g.w2.values()) out.push_back(&x);
  for (auto& x : g.b2) out.push_back(&x);
  for (auto& x : g.l.values()) out.push_back(&x);
  return out;
}

std::vector<double> flatten(const CostGradients& gr) {
  std::vector<double> out(gr.w1.values().begin(), gr.w1.values().end());
  out.insert(out.end(), gr.b1.begin(), gr.b1.end());
  out.insert(out.end(), gr.w2.values().begin(), gr.w2.values().end());
  out.insert(out.end(), gr.b2.begin(), gr.b2.end());
  out.insert(out.end(), gr.l.values().begin(), gr.l.values().end());
  return out;
}

TEST(CostModel, ZeroWeightsGiveZeroEmbedding) {
  OtGeometry g = init_geometry(4, 3, 2, 1);
  g.w1.fill(0.0);
  g.w2.fill(0.0);
  EXPECT_EQ(embed(g, std::vector<double>{1, -2, 3, 4}), (Vector{0.0, 0.0}));
}

TEST(CostModel, IdentityLayersPassPositiveInputs) {
  OtGeometry g = init_geometry(3, 3, 3, 1);
  g.w1 = Matrix::identity(3);
  g.w2 = Matrix::identity(3);
  const Vector z{0.5, 1.5, 2.0};
  EXPECT_EQ(embed(g, z), z);
  EXPECT_EQ(project(g, z), z);
}

TEST(CostModel, InitIsDeterministic) {
  const auto a = init_geometry(5, 4, 3, 9);
  const auto b = init_geometry(5, 4, 3, 9);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, init_geometry(5, 4, 3, 10));
  const Vector z{1, 2, 3, 4, 5};
  EXPECT_EQ(embed(a, z), embed(b, z));
  EXPECT_THROW(embed(a, std::vector<double>{1, 2}), ShapeError);
}

TEST(CostModel, GroundCostBasics) {
  const OtGeometry g = random_geometry(4, 5, 3, 2);
  const Vector z{0.1, -0.3, 0.7, 1.0};
  EXPECT_EQ(ground_cost(g, z, z), 0.0);

  OtGeometry id = init_geometry(2, 2, 2, 1);
  id.w1 = Matrix::identity(2);
  id.w2 = Matrix::identity(2);
  EXPECT_DOUBLE_EQ(ground_cost(id, std::vector<double>{1.0, 1.0}, std::vector<double>{2.0, 1.0}), 1.0);
}

TEST(CostModel, GroundCostMatchesExplicitMetric) {
  std::mt19937_64 rng(3);
  const OtGeometry g = random_geometry(5, 6, 4, 3);
  const Matrix m = metric(g);
  for (int k = 0; k < 10; ++k) {
    const auto z = random_vec(5, rng);
    const auto zp = random_vec(5, rng);
    const Vector e = embed(g, z);
    const Vector ep = embed(g, zp);
    // (e - e')^T L^T L (e - e') computed two ways.
    double via_m = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) via_m += (e[i] - ep[i]) * m(i, j) * (e[j] - ep[j]);
    double via_l = 0.0;
    for (std::size_t r = 0; r < 4; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 4; ++c) s += g.l(r, c) * (e[c] - ep[c]);
      via_l += s * s;
    }
    EXPECT_NEAR(ground_cost(g, z, zp), via_l, 1e-12 * (1 + via_l));
    EXPECT_NEAR(via_m, via_l, 1e-12 * (1 + via_l));
  }
}

TEST(CostModel, CostMatrixShapesAndSymmetry) {
  const OtGeometry g = random_geometry(3, 4, 2, 4);
  NeighborMeasure a, b;
  a.atoms = {{node_id(0), {1, 2, 3}}, {node_id(1), {0, 1, 0}}};
  a.weights = {0.5, 0.5};
  b.atoms = {{node_id(2), {1, 2, 3}}};
  b.weights = {1.0};
  const CostMatrix ab = cost_matrix_for(g, a, b);
  ASSERT_EQ(ab.rows(), 2u);
  ASSERT_EQ(ab.cols(), 1u);
  EXPECT_EQ(ab.values(0, 0), 0.0);
  const CostMatrix ba = cost_matrix_for(g, b, a);
  EXPECT_DOUBLE_EQ(ab.values(1, 0), ba.values(0, 1));
  const CostMatrix bb = cost_matrix_for(g, b, b);
  EXPECT_EQ(bb.values(0, 0), 0.0);
}

TEST(CostModel, BackwardZeroWeights) {
  const OtGeometry g = random_geometry(3, 4, 2, 5);
  const Vector z{1, 2, 3}, zp{0, -1, 2};
  const std::vector<CostPair> pairs{{z, zp, 0.0}};
  EXPECT_EQ(backward(g, pairs).squared_norm(), 0.0);
}

TEST(CostModel, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const OtGeometry g = random_geometry(6, 4, 3, seed);
    const auto z = random_vec(6, rng);
    const auto zp = random_vec(6, rng);
    const std::vector<CostPair> pairs{{z, zp, 0.7}};
    const auto analytic = flatten(backward(g, pairs));
    OtGeometry probe = g;
    const auto params = parameters(probe);
    std::vector<double> x;
    for (double* p : params) x.push_back(*p);
    auto f = [&](const std::vector<double>& flat) {
      for (std::size_t i = 0; i < flat.size(); ++i) *params[i] = flat[i];
      return 0.7 * ground_cost(probe, z, zp);
    };
    EXPECT_LT(oracle::relative_error(analytic, oracle::central_difference(f, x, 1e-5)), 1e-4);
  }
}

TEST(CostModel, BackwardIsLinearInWeights) {
  const OtGeometry g = random_geometry(4, 5, 3, 7);
  const Vector z{1, 0, -1, 2}, zp{0.5, 0.5, 0.5, 0.5};
  const std::vector<CostPair> twice{{z, zp, 0.3}, {z, zp, 0.3}};
  const std::vector<CostPair> once{{z, zp, 0.6}};
  const auto a = flatten(backward(g, twice));
  const auto b = flatten(backward(g, once));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14 * (1 + std::abs(b[i])));
}

TEST(CostModel, BackwardMatrixMatchesPairwiseBackward) {
  std::mt19937_64 rng(8);
  const OtGeometry g = random_geometry(4, 6, 3, 8);
  std::vector<Vector> za, zb;
  for (int i = 0; i < 3; ++i) za.push_back(random_vec(4, rng));
  for (int j = 0; j < 2; ++j) zb.push_back(random_vec(4, rng));
  Matrix up(3, 2);
  for (auto& x : up.values()) x = random_vec(1, rng)[0];
  CostGradients agg = CostGradients::zeros_like(g);
  backward_matrix(g, za, zb, up, agg);
  std::vector<CostPair> pairs;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) pairs.push_back({za[i], zb[j], up(i, j)});
  const auto a = flatten(agg);
  const auto b = flatten(backward(g, pairs));
  EXPECT_LT(oracle::relative_error(a, b), 1e-12);
}

TEST(CostModel, StandardizationStatistics) {
  OtGeometry g = init_geometry(2, 2, 2, 1);
  const std::vector<Vector> samples{{1, 5}, {3, 5}};
  fit_standardization(g, samples);
  EXPECT_EQ(g.feature_mean, (Vector{2, 5}));
  EXPECT_EQ(g.feature_scale, (Vector{1, 1}));
  const std::vector<Vector> wide{{0, 5}, {4, 5}};
  fit_standardization(g, wide);
  EXPECT_EQ(g.feature_scale[0], 2.0);
}

class GeometryFile : public ::testing::Test {
 protected:
  std::filesystem::path path =
      std::filesystem::temp_directory_path() / ("otcloak_geo_" + std::to_string(::getpid()) + ".bin");
  void TearDown() override { std::filesystem::remove(path); }
};

TEST_F(GeometryFile, RoundTripIsExact) {
  const OtGeometry g = random_geometry(5, 4, 3, 11);
  save_geometry(g, path);
  EXPECT_EQ(load_geometry(path), g);
}

TEST_F(GeometryFile, TruncatedOrWrongVersionRejected) {
  save_geometry(random_geometry(5, 4, 3, 12), path);
  std::ifstream in(path, std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  std::ofstream(path, std::ios::binary | std::ios::trunc).write(bytes.data(), 40);
  EXPECT_THROW(load_geometry(path), FormatError);

  auto wrong = bytes;
  wrong[5] = '9';  // OTGEO1 -> OTGEO9
  std::ofstream(path, std::ios::binary | std::ios::trunc).write(wrong.data(), static_cast<std::streamsize>(wrong.size()));
  EXPECT_THROW(load_geometry(path), FormatError);
}

}  // namespace
}  // namespace otcloak
