#ifndef MAHABO_MAHABO_HPP
#define MAHABO_MAHABO_HPP

// Batch Bayesian optimization for high-dimensional objectives with a learned
// linear embedding: Mahalanobis-kernel Gaussian processes, confidence-bound
// acquisition optimized directly in the high-dimensional box, k-DPP batch
// completion over the relevant region, and two-step reconstruction
// baselines.

#include "mahabo/acquisition.hpp"
#include "mahabo/batch_dpp.hpp"
#include "mahabo/benchmarks.hpp"
#include "mahabo/box_domain.hpp"
#include "mahabo/dataset.hpp"
#include "mahabo/embedding.hpp"
#include "mahabo/external_objective.hpp"
#include "mahabo/fit.hpp"
#include "mahabo/gp.hpp"
#include "mahabo/harness.hpp"
#include "mahabo/kernel.hpp"
#include "mahabo/lbfgsb.hpp"
#include "mahabo/likelihood.hpp"
#include "mahabo/rng.hpp"
#include "mahabo/sobol.hpp"
#include "mahabo/two_step.hpp"
#include "mahabo/types.hpp"

#endif  // MAHABO_MAHABO_HPP
