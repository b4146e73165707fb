#include "savfi/clutter.hpp"

#include <Eigen/Dense>

#include <stdexcept>

namespace savfi {
namespace {

// Gram matrix G = X^H X of the (H*W) x n_frames Casorati matrix, plus its
// eigen-decomposition with eigenvalues sorted descending.
struct GramEig {
  Eigen::MatrixXcd vectors;  // columns = right singular vectors of X
  Eigen::VectorXd values;    // squared singular values, descending
};

GramEig gram_eig(const IqStack& stack) {
  const int n = stack.n_frames;
  const std::size_t pixels =
      static_cast<std::size_t>(stack.height) * stack.width;
  Eigen::MatrixXcd gram = Eigen::MatrixXcd::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      std::complex<double> acc{0.0, 0.0};
      const std::complex<float>* fa = stack.frame(a);
      const std::complex<float>* fb = stack.frame(b);
      for (std::size_t i = 0; i < pixels; ++i) {
        acc += std::conj(std::complex<double>(fa[i])) *
               std::complex<double>(fb[i]);
      }
      gram(a, b) = acc;
      gram(b, a) = std::conj(acc);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(gram);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("gram eigendecomposition failed");
  }
  // Eigen returns ascending order; flip to descending singular order.
  GramEig out;
  out.vectors.resize(n, n);
  out.values.resize(n);
  for (int k = 0; k < n; ++k) {
    out.values(k) = std::max(0.0, solver.eigenvalues()(n - 1 - k));
    out.vectors.col(k) = solver.eigenvectors().col(n - 1 - k);
  }
  return out;
}

}  // namespace

std::vector<double> casorati_singular_values(const IqStack& stack) {
  if (stack.n_frames < 2) {
    throw std::invalid_argument("casorati stack needs >= 2 frames");
  }
  const GramEig eig = gram_eig(stack);
  std::vector<double> sv(static_cast<std::size_t>(stack.n_frames));
  for (int k = 0; k < stack.n_frames; ++k) {
    sv[static_cast<std::size_t>(k)] = std::sqrt(eig.values(k));
  }
  return sv;
}

IqStack svd_filter(const IqStack& stack, int low_cut, int high_cut) {
  const int n = stack.n_frames;
  if (n < 2) {
    throw std::invalid_argument("casorati stack needs >= 2 frames");
  }
  if (low_cut < 0 || low_cut >= high_cut || high_cut > n) {
    throw std::invalid_argument("invalid SVD cut range");
  }
  const GramEig eig = gram_eig(stack);

  // Projection onto the kept right-singular subspace: X' = X V_keep V_keep^H.
  Eigen::MatrixXcd proj = Eigen::MatrixXcd::Zero(n, n);
  for (int k = low_cut; k < high_cut; ++k) {
    proj.noalias() += eig.vectors.col(k) * eig.vectors.col(k).adjoint();
  }

  IqStack out = stack;
  const std::size_t pixels =
      static_cast<std::size_t>(stack.height) * stack.width;
  std::vector<std::complex<double>> row(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < pixels; ++i) {
    for (int f = 0; f < n; ++f) {
      row[static_cast<std::size_t>(f)] =
          std::complex<double>(stack.frame(f)[i]);
    }
    for (int f = 0; f < n; ++f) {
      std::complex<double> acc{0.0, 0.0};
      for (int g = 0; g < n; ++g) {
        acc += row[static_cast<std::size_t>(g)] * proj(g, f);
      }
      out.frame(f)[i] = std::complex<float>(
          static_cast<float>(acc.real()), static_cast<float>(acc.imag()));
    }
  }
  return out;
}

}  // namespace savfi
