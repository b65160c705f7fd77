#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "otcloak/features.hpp"
#include "otcloak/matrix.hpp"
#include "otcloak/ot.hpp"

namespace otcloak {

/// Learned ground cost c(z, z') = || L (h(z) - h(z')) ||^2, i.e. a squared
/// Mahalanobis distance with M = L^T L between embeddings of a two-layer
/// ReLU network h. Inputs are standardized with stored per-coordinate
/// statistics before entering the network.
struct OtGeometry {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t embed_dim = 0;
  Matrix w1;  // hidden x input
  Vector b1;
  Matrix w2;  // embed x hidden
  Vector b2;
  Matrix l;   // embed x embed
  Vector feature_mean;
  Vector feature_scale;  // divisor, > 0
  std::uint64_t rng_seed = 0;

  friend bool operator==(const OtGeometry&, const OtGeometry&) = default;
};

inline constexpr std::size_t kDefaultHidden = 128;
inline constexpr std::size_t kDefaultEmbed = 256;

/// Fan-in scaled uniform weights, zero biases, L = I, identity standardization.
OtGeometry init_geometry(std::size_t input_dim, std::size_t hidden_dim = kDefaultHidden,
                         std::size_t embed_dim = kDefaultEmbed, std::uint64_t seed = 0);

/// Sets the standardization statistics from sample feature vectors
/// (coordinates with zero variance get scale 1).
void fit_standardization(OtGeometry& geo, std::span<const Vector> samples);

/// M = L^T L.
Matrix metric(const OtGeometry& geo);

/// Forward pass h(z). Throws ShapeError on dimension mismatch.
Vector embed(const OtGeometry& geo, std::span<const double> z);
/// L h(z); squared distances between projections are ground costs.
Vector project(const OtGeometry& geo, std::span<const double> z);

double ground_cost(const OtGeometry& geo, std::span<const double> z, std::span<const double> zp);

/// C_ij = c(atom_i, atom_j); marginals are the measure weights. Each atom is
/// embedded once.
CostMatrix cost_matrix_for(const OtGeometry& geo, const NeighborMeasure& mu_a,
                           const NeighborMeasure& mu_b);

/// Cost matrix from precomputed projections (rows of `ya`, `yb`).
CostMatrix cost_matrix_from_projections(const std::vector<Vector>& ya, const std::vector<Vector>& yb,
                                        Vector a, Vector b);

/// Parameter gradients mirroring the geometry's learnable tensors.
struct CostGradients {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
  Matrix l;

  static CostGradients zeros_like(const OtGeometry& geo);
  void add_scaled(const CostGradients& other, double scale);
  double squared_norm() const;
};

struct CostPair {
  std::span<const double> z;
  std::span<const double> zp;
  double weight = 1.0;
};

/// Gradient of sum_k weight_k c(z_k, z'_k) with respect to (W1, b1, W2, b2, L).
CostGradients backward(const OtGeometry& geo, std::span<const CostPair> pairs);

/// Gradient of sum_ij upstream_ij c(za_i, zb_j), accumulated into `grads`.
/// Aggregates per atom, so the cost is O((m + n) network passes).
void backward_matrix(const OtGeometry& geo, std::span<const Vector> za, std::span<const Vector> zb,
                     const Matrix& upstream, CostGradients& grads);

/// theta <- theta - learning_rate * grads.
void gradient_step(OtGeometry& geo, const CostGradients& grads, double learning_rate);

/// Versioned binary checkpoint ("OTGEO1"). Round trips are bit-exact.
void save_geometry(const OtGeometry& geo, const std::filesystem::path& path);
/// Throws FormatError on a wrong magic/version or a truncated file.
OtGeometry load_geometry(const std::filesystem::path& path);

}  // namespace otcloak
