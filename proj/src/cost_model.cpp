#include "otcloak/cost_model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "otcloak/binary_io.hpp"
#include "otcloak/errors.hpp"
#include "otcloak/kernels.hpp"

namespace otcloak {
namespace {

constexpr std::string_view kMagic = "OTGEO1";

struct Forward {
  Vector x;     // standardized input
  Vector pre;   // W1 x + b1
  Vector h;     // relu(pre)
  Vector e;     // W2 h + b2
  Vector y;     // L e
};

void check_input(const OtGeometry& geo, std::span<const double> z) {
  if (z.size() != geo.input_dim) {
    throw ShapeError("feature dimension " + std::to_string(z.size()) + " != geometry input " +
                     std::to_string(geo.input_dim));
  }
}

Forward forward(const OtGeometry& geo, std::span<const double> z) {
  check_input(geo, z);
  const auto& k = kernels::active();
  Forward f;
  f.x.resize(geo.input_dim);
  for (std::size_t i = 0; i < geo.input_dim; ++i) {
    f.x[i] = (z[i] - geo.feature_mean[i]) / geo.feature_scale[i];
  }
  f.pre.resize(geo.hidden_dim);
  k.gemv(geo.w1.data(), geo.hidden_dim, geo.input_dim, f.x.data(), f.pre.data());
  f.h.resize(geo.hidden_dim);
  for (std::size_t i = 0; i < geo.hidden_dim; ++i) {
    f.pre[i] += geo.b1[i];
    f.h[i] = f.pre[i] > 0.0 ? f.pre[i] : 0.0;
  }
  f.e.resize(geo.embed_dim);
  k.gemv(geo.w2.data(), geo.embed_dim, geo.hidden_dim, f.h.data(), f.e.data());
  for (std::size_t i = 0; i < geo.embed_dim; ++i) f.e[i] += geo.b2[i];
  f.y.resize(geo.embed_dim);
  k.gemv(geo.l.data(), geo.embed_dim, geo.embed_dim, f.e.data(), f.y.data());
  return f;
}

// Accumulates the parameter gradient of <g_y, y(z)> for one forward trace.
void backprop(const OtGeometry& geo, const Forward& f, std::span<const double> g_y,
              CostGradients& grads) {
  const auto& k = kernels::active();
  for (std::size_t r = 0; r < geo.embed_dim; ++r) {
    if (g_y[r] != 0.0) k.axpy(g_y[r], f.e.data(), grads.l.row(r).data(), geo.embed_dim);
  }
  Vector g_e(geo.embed_dim);
  k.gemv_t(geo.l.data(), geo.embed_dim, geo.embed_dim, g_y.data(), g_e.data());
  for (std::size_t r = 0; r < geo.embed_dim; ++r) {
    grads.b2[r] += g_e[r];
    if (g_e[r] != 0.0) k.axpy(g_e[r], f.h.data(), grads.w2.row(r).data(), geo.hidden_dim);
  }
  Vector g_h(geo.hidden_dim);
  k.gemv_t(geo.w2.data(), geo.embed_dim, geo.hidden_dim, g_e.data(), g_h.data());
  for (std::size_t r = 0; r < geo.hidden_dim; ++r) {
    if (!(f.pre[r] > 0.0)) continue;
    grads.b1[r] += g_h[r];
    k.axpy(g_h[r], f.x.data(), grads.w1.row(r).data(), geo.input_dim);
  }
}

}  // namespace

OtGeometry init_geometry(std::size_t input_dim, std::size_t hidden_dim, std::size_t embed_dim,
                         std::uint64_t seed) {
  if (input_dim == 0 || hidden_dim == 0 || embed_dim == 0) {
    throw InvalidParams("geometry dimensions must be positive");
  }
  OtGeometry geo;
  geo.input_dim = input_dim;
  geo.hidden_dim = hidden_dim;
  geo.embed_dim = embed_dim;
  geo.rng_seed = seed;
  std::mt19937_64 rng(seed);
  auto fill_uniform = [&](Matrix& m, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : m.values()) w = dist(rng);
  };
  geo.w1 = Matrix(hidden_dim, input_dim);
  fill_uniform(geo.w1, input_dim);
  geo.b1.assign(hidden_dim, 0.0);
  geo.w2 = Matrix(embed_dim, hidden_dim);
  fill_uniform(geo.w2, hidden_dim);
  geo.b2.assign(embed_dim, 0.0);
  geo.l = Matrix::identity(embed_dim);
  geo.feature_mean.assign(input_dim, 0.0);
  geo.feature_scale.assign(input_dim, 1.0);
  return geo;
}

void fit_standardization(OtGeometry& geo, std::span<const Vector> samples) {
  geo.feature_mean.assign(geo.input_dim, 0.0);
  geo.feature_scale.assign(geo.input_dim, 1.0);
  if (samples.empty()) return;
  const double n = static_cast<double>(samples.size());
  for (const auto& s : samples) {
    check_input(geo, s);
    for (std::size_t i = 0; i < geo.input_dim; ++i) geo.feature_mean[i] += s[i] / n;
  }
  Vector var(geo.input_dim, 0.0);
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < geo.input_dim; ++i) {
      const double d = s[i] - geo.feature_mean[i];
      var[i] += d * d / n;
    }
  }
  for (std::size_t i = 0; i < geo.input_dim; ++i) {
    const double sd = std::sqrt(var[i]);
    geo.feature_scale[i] = sd > 1e-12 ? sd : 1.0;
  }
}

Matrix metric(const OtGeometry& geo) {
  Matrix m(geo.embed_dim, geo.embed_dim);
  for (std::size_t k = 0; k < geo.embed_dim; ++k) {
    const auto row = geo.l.row(k);
    for (std::size_t i = 0; i < geo.embed_dim; ++i) {
      if (row[i] == 0.0) continue;
      kernels::active().axpy(row[i], row.data(), m.row(i).data(), geo.embed_dim);
    }
  }
  return m;
}

Vector embed(const OtGeometry& geo, std::span<const double> z) { return forward(geo, z).e; }

Vector project(const OtGeometry& geo, std::span<const double> z) { return forward(geo, z).y; }

double ground_cost(const OtGeometry& geo, std::span<const double> z, std::span<const double> zp) {
  const Vector y = project(geo, z);
  const Vector yp = project(geo, zp);
  return kernels::sq_dist(y, yp);
}

CostMatrix cost_matrix_from_projections(const std::vector<Vector>& ya, const std::vector<Vector>& yb,
                                        Vector a, Vector b) {
  if (ya.empty() || yb.empty()) throw EmptyNeighborhood("cost matrix needs nonempty measures");
  CostMatrix c{Matrix(ya.size(), yb.size()), std::move(a), std::move(b)};
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < ya.size(); ++i) {
    for (std::size_t j = 0; j < yb.size(); ++j) {
      c.values(i, j) = k.sq_dist(ya[i].data(), yb[j].data(), ya[i].size());
    }
  }
  return c;
}

CostMatrix cost_matrix_for(const OtGeometry& geo, const NeighborMeasure& mu_a,
                           const NeighborMeasure& mu_b) {
  if (mu_a.size() == 0 || mu_b.size() == 0) {
    throw EmptyNeighborhood("cost matrix needs nonempty measures");
  }
  std::vector<Vector> ya, yb;
  ya.reserve(mu_a.size());
  yb.reserve(mu_b.size());
  for (const auto& atom : mu_a.atoms) ya.push_back(project(geo, atom.feat));
  for (const auto& atom : mu_b.atoms) yb.push_back(project(geo, atom.feat));
  return cost_matrix_from_projections(ya, yb, mu_a.weights, mu_b.weights);
}

CostGradients CostGradients::zeros_like(const OtGeometry& geo) {
  return {Matrix(geo.hidden_dim, geo.input_dim), Vector(geo.hidden_dim, 0.0),
          Matrix(geo.embed_dim, geo.hidden_dim), Vector(geo.embed_dim, 0.0),
          Matrix(geo.embed_dim, geo.embed_dim)};
}

void CostGradients::add_scaled(const CostGradients& other, double scale) {
  const auto& k = kernels::active();
  k.axpy(scale, other.w1.data(), w1.data(), w1.size());
  k.axpy(scale, other.b1.data(), b1.data(), b1.size());
  k.axpy(scale, other.w2.data(), w2.data(), w2.size());
  k.axpy(scale, other.b2.data(), b2.data(), b2.size());
  k.axpy(scale, other.l.data(), l.data(), l.size());
}

double CostGradients::squared_norm() const {
  return kernels::dot(w1.values(), w1.values()) + kernels::dot(b1, b1) +
         kernels::dot(w2.values(), w2.values()) + kernels::dot(b2, b2) +
         kernels::dot(l.values(), l.values());
}

CostGradients backward(const OtGeometry& geo, std::span<const CostPair> pairs) {
  CostGradients grads = CostGradients::zeros_like(geo);
  Vector g(geo.embed_dim);
  for (const auto& pair : pairs) {
    if (!std::isfinite(pair.weight)) throw InvalidParams("non-finite upstream weight");
    if (pair.weight == 0.0) continue;
    const Forward f = forward(geo, pair.z);
    const Forward fp = forward(geo, pair.zp);
    for (std::size_t r = 0; r < geo.embed_dim; ++r) g[r] = 2.0 * pair.weight * (f.y[r] - fp.y[r]);
    backprop(geo, f, g, grads);
    for (double& x : g) x = -x;
    backprop(geo, fp, g, grads);
  }
  return grads;
}

void backward_matrix(const OtGeometry& geo, std::span<const Vector> za, std::span<const Vector> zb,
                     const Matrix& upstream, CostGradients& grads) {
  if (upstream.rows() != za.size() || upstream.cols() != zb.size()) {
    throw ShapeError("upstream gradient shape does not match the atom lists");
  }
  std::vector<Forward> fa, fb;
  fa.reserve(za.size());
  fb.reserve(zb.size());
  for (const auto& z : za) fa.push_back(forward(geo, z));
  for (const auto& z : zb) fb.push_back(forward(geo, z));

  // dF/dy_i = 2 sum_j W_ij (y_i - y'_j),  dF/dy'_j = -2 sum_i W_ij (y_i - y'_j)
  const std::size_t d = geo.embed_dim;
  std::vector<Vector> ga(za.size(), Vector(d, 0.0));
  std::vector<Vector> gb(zb.size(), Vector(d, 0.0));
  for (std::size_t i = 0; i < za.size(); ++i) {
    for (std::size_t j = 0; j < zb.size(); ++j) {
      const double w = upstream(i, j);
      if (!std::isfinite(w)) throw InvalidParams("non-finite upstream weight");
      if (w == 0.0) continue;
      for (std::size_t r = 0; r < d; ++r) {
        const double diff = 2.0 * w * (fa[i].y[r] - fb[j].y[r]);
        ga[i][r] += diff;
        gb[j][r] -= diff;
      }
    }
  }
  for (std::size_t i = 0; i < za.size(); ++i) backprop(geo, fa[i], ga[i], grads);
  for (std::size_t j = 0; j < zb.size(); ++j) backprop(geo, fb[j], gb[j], grads);
}

void gradient_step(OtGeometry& geo, const CostGradients& grads, double learning_rate) {
  const auto& k = kernels::active();
  k.axpy(-learning_rate, grads.w1.data(), geo.w1.data(), geo.w1.size());
  k.axpy(-learning_rate, grads.b1.data(), geo.b1.data(), geo.b1.size());
  k.axpy(-learning_rate, grads.w2.data(), geo.w2.data(), geo.w2.size());
  k.axpy(-learning_rate, grads.b2.data(), geo.b2.data(), geo.b2.size());
  k.axpy(-learning_rate, grads.l.data(), geo.l.data(), geo.l.size());
}

void save_geometry(const OtGeometry& geo, const std::filesystem::path& path) {
  binio::Writer w(kMagic);
  w.u64(geo.input_dim);
  w.u64(geo.hidden_dim);
  w.u64(geo.embed_dim);
  w.u64(geo.rng_seed);
  w.block(geo.w1.values());
  w.block(geo.b1);
  w.block(geo.w2.values());
  w.block(geo.b2);
  w.block(geo.l.values());
  w.block(geo.feature_mean);
  w.block(geo.feature_scale);
  w.save(path);
}

OtGeometry load_geometry(const std::filesystem::path& path) {
  binio::Reader r(path, kMagic);
  OtGeometry geo;
  geo.input_dim = r.u64();
  geo.hidden_dim = r.u64();
  geo.embed_dim = r.u64();
  geo.rng_seed = r.u64();
  if (geo.input_dim == 0 || geo.hidden_dim == 0 || geo.embed_dim == 0) {
    throw FormatError("zero geometry dimension");
  }
  geo.w1 = r.matrix(geo.hidden_dim, geo.input_dim);
  geo.b1 = r.vector(geo.hidden_dim);
  geo.w2 = r.matrix(geo.embed_dim, geo.hidden_dim);
  geo.b2 = r.vector(geo.embed_dim);
  geo.l = r.matrix(geo.embed_dim, geo.embed_dim);
  geo.feature_mean = r.vector(geo.input_dim);
  geo.feature_scale = r.vector(geo.input_dim);
  r.expect_end();
  return geo;
}

}  // namespace otcloak
