#pragma once

#include <cstdint>
#include <random>

#include "prelog/types.hpp"

namespace prelog {

using Rng = std::mt19937_64;

// Independent engine for (seed, stream). Streams let parallel workers draw
// reproducibly no matter how many threads run them.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

// Standard proper complex Gaussian CN(0, 1): real and imaginary parts each
// have variance 1/2.
cplx complex_normal(Rng& rng);

CVector complex_normal_vector(Rng& rng, Eigen::Index n);

double uniform01(Rng& rng);

}  // namespace prelog
