#pragma once

#include <Eigen/Dense>

#include "fedcpu/lattice.hpp"

namespace fedcpu::oracle {

/// Nearest lattice point by exhaustive search, independent of the fast
/// decoders. Generic lattices enumerate integer coefficients in a box of the
/// given radius around the rounded least-squares solution; E8 enumerates its
/// point set directly (integer or half-integer coordinates, even sum) inside
/// the covering-radius box around x.
Eigen::VectorXd enumerate_nearest_point(const LatticeSpec& lattice,
                                        const Eigen::Ref<const Eigen::VectorXd>& x,
                                        int radius = 4);

/// True when point lies on rho * G * Z^n (coordinates integral to tol).
bool is_lattice_point(const LatticeSpec& lattice,
                      const Eigen::Ref<const Eigen::VectorXd>& point, double tol = 1e-9);

}  // namespace fedcpu::oracle
