#pragma once

// Finite correlation kernels on a one-dimensional lattice.
//
// A circulant kernel lives on the torus Z_N and is stored through its
// generator c[d] = K(i, i - d); its eigenvalues are the spectral samples
// A(j/N - 1/2). Dense kernels store the full Hermitian matrix.

#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dpplab/spectral.hpp"

namespace dpp {

using cplx = std::complex<double>;

inline constexpr double kEigTol = 1e-9;
// Largest dense matrix the library will materialize.
inline constexpr long kMaxDenseSites = 4096;

class MatrixKernel {
 public:
  enum class Structure { circulant, dense };

  // Validates Hermiticity (up to 1e-12 relative, then symmetrized exactly)
  // and the eigenvalue range. Coordinates default to 0..n-1.
  static MatrixKernel dense(const Eigen::MatrixXcd& m, std::vector<long> coordinates = {});
  static MatrixKernel dense(const Eigen::MatrixXd& m, std::vector<long> coordinates = {});

  long n_sites() const;
  Structure structure() const;
  bool is_real() const;
  double lattice_spacing() const { return 1.0; }
  std::uint64_t id() const;

  cplx operator()(long i, long j) const;
  double diagonal(long i) const;

  // Lattice coordinate of each site; circulant kernels use i - floor(N/2).
  std::span<const long> coordinates() const;

  // Circulant: spectral samples in frequency order. Dense: ascending, computed
  // on first use.
  const Eigen::VectorXd& eigenvalues() const;

  // Circulant only: c[d], d = 0..N-1.
  const std::vector<cplx>& generator() const;

  // Dense storage; exactly one of these is non-empty for a dense kernel.
  const Eigen::MatrixXd& real_matrix() const;
  const Eigen::MatrixXcd& complex_matrix() const;

  Eigen::MatrixXcd to_matrix() const;

  // Principal submatrix on the given site indices (a dense kernel; the
  // restriction of an admissible kernel is admissible, so no revalidation).
  MatrixKernel restrict_to(std::span<const long> sites) const;

  struct Data;

 private:
  explicit MatrixKernel(std::shared_ptr<const Data> d) : d_(std::move(d)) {}
  friend MatrixKernel build_circulant(const SpectralFunction& s, long n_sites);
  friend MatrixKernel make_dense(Eigen::MatrixXd re, Eigen::MatrixXcd cx, std::vector<long> coords,
                                 bool validate);

  std::shared_ptr<const Data> d_;
};

MatrixKernel build_circulant(const SpectralFunction& s, long n_sites);

// Forward transform of a circulant generator: recovers the spectral samples.
std::vector<double> circulant_spectrum(const MatrixKernel& k);

// Q is tabulated at r = 0, 1, 2, ... (r = |x| + |y| in lattice units) and
// taken as 0 past the end of the grid. R is indexed like the kernel it perturbs.
struct PerturbationEnvelope {
  std::vector<double> q;
  Eigen::MatrixXcd r;

  double envelope(double r_abs) const;
};

// base + R as a dense kernel. Throws EnvelopeViolated or AdmissibilityLost.
MatrixKernel perturb(const MatrixKernel& base, const PerturbationEnvelope& env);

// R = -eps (K^{1/2} w)(K^{1/2} w)^* with w ~ exp(-|x| / width), |w| = 1,
// built on the full circulant and then restricted to `window`. Keeps
// 0 <= K + R <= K for 0 <= eps <= 1.
PerturbationEnvelope rank_one_damping(const MatrixKernel& circulant, double epsilon, double width,
                                      std::span<const long> window);

}  // namespace dpp
