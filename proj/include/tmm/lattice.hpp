#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tmm/kernel.hpp"

namespace tmm {

// L = { sum_d alpha_d l_d : alpha in Z^D } with generator rows l_d.
class Lattice {
public:
    // Rows of `generators` are the lattice vectors. Throws InvalidArgument when
    // the matrix is not square or |det| <= 1e-12.
    explicit Lattice(Eigen::MatrixXd generators);

    static Lattice unit(int dim);
    static Lattice rectangular(const Eigen::VectorXd& periods);

    int dim() const { return static_cast<int>(generators_.rows()); }
    const Eigen::MatrixXd& generators() const { return generators_; }
    // Rows l*_j with <l_i, l*_j> = delta_ij (inverse transpose of generators).
    const Eigen::MatrixXd& dual() const { return dual_; }
    double cell_volume() const { return volume_; }
    bool is_diagonal() const { return diagonal_; }
    // Diagonal entries; meaningful when is_diagonal().
    Eigen::VectorXd periods() const { return generators_.diagonal(); }

    // Dual-lattice point sum_j m_j l*_j.
    Eigen::VectorXd dual_point(std::span<const int> index) const;
    // Maps unit-cube coordinates h to the cell point sum_d h_d l_d.
    Eigen::VectorXd from_cell_coords(Point h) const;
    // Reduces x into the fundamental cell (cell coordinates in [0, 1)).
    void wrap(std::span<double> x) const;

    std::string id() const;

    bool operator==(const Lattice& other) const { return generators_ == other.generators_; }

private:
    Eigen::MatrixXd generators_;
    Eigen::MatrixXd dual_;
    double volume_ = 0.0;
    bool diagonal_ = false;
};

enum class ProfileFamily { constant, matern, gaussian, custom };

std::string to_string(ProfileFamily family);

struct SpectralEntry {
    std::vector<int> index;  // multi-index m of the dual point sum_j m_j l*_j
    double rho = 0.0;
};

// Nonnegative summable coefficients rho over the dual lattice with rho(0) = 1.
//
// Family profiles are tensor products rho(a*) = prod_d c(a*_d) over the
// Cartesian coordinates of the dual point:
//   matern:   c(w) = 1 / (1 + (2 pi w scale)^2)
//   gaussian: c(w) = exp(-(pi w scale)^2)
//   constant: c(w) = [w == 0]
//
// The stored support keeps every dual point with rho >= truncation_eps,
// found by expanding hyper-rectangles of multi-indices; for D > 6 each index
// is capped at the largest m with c(m) >= truncation_eps^(1/D). The support
// is materialized lazily: on rectangular lattices family profiles never need
// it (kernel evaluation and the tail sums use per-coordinate closed forms).
class SpectralProfile {
public:
    static SpectralProfile family(const Lattice& lattice, ProfileFamily family, double scale,
                                  double truncation_eps = 1e-8);
    // Arbitrary coefficients. Symmetrizes rho(m) <-> rho(-m) by averaging.
    // Throws InvalidArgument if empty, negative, or rho(0) != 1.
    static SpectralProfile custom(const Lattice& lattice, std::vector<SpectralEntry> entries);

    ProfileFamily family() const;
    double scale() const;
    double truncation_eps() const;
    const Lattice& lattice() const;

    double rho(std::span<const int> index) const;

    // Tensor-product family on a rectangular lattice.
    bool separable() const;
    // c(m / L_d) for coordinate d of a separable profile.
    double coefficient_1d(int d, int m) const;

    // Truncated support sorted by nonincreasing rho (ties broken by index).
    const std::vector<SpectralEntry>& support() const;

    // Sum of rho over the whole dual lattice (exact for separable profiles,
    // over the stored support otherwise).
    double total_mass() const;
    // Sum of the n largest coefficients.
    double top_sum(std::size_t n) const;
    // Number of dual points with rho > 0, or -1 when unbounded.
    long long support_size() const;

    std::string id() const;

private:
    struct State;
    explicit SpectralProfile(std::shared_ptr<const State> state);
    std::shared_ptr<const State> state_;
};

SpectralProfile matern_spectral_profile(const Lattice& lattice, double scale,
                                        double truncation_eps = 1e-8);

enum class KernelNormalization { none, unit_diagonal };

std::string to_string(KernelNormalization n);

// K(x, y) = w / |C| * sum_a* rho(a*) cos(2 pi <x - y, a*>), w = 1 for `none`
// and w = |C| / sum(rho) for `unit_diagonal` (so that K(x, x) = 1).
Kernel lattice_kernel(const Lattice& lattice, const SpectralProfile& profile,
                      KernelNormalization normalization = KernelNormalization::none);

struct SeaBound {
    double value = 0.0;
    // N reached the size of the (finite) support: the tail is empty.
    bool support_exhausted = false;
};

// sqrt( (w / |C|) (1/N) sum_{n > N} rho(a*^n) ) with rho sorted nonincreasing;
// w as in lattice_kernel.
SeaBound sea_bound(const SpectralProfile& profile, long long n,
                   KernelNormalization normalization = KernelNormalization::none);

}  // namespace tmm
