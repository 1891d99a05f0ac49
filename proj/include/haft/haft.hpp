#ifndef HAFT_HAFT_HPP
#define HAFT_HAFT_HPP

// Heteroscedastic accelerated-failure-time survival modeling:
// maximum-likelihood fitting with and without right-censoring, Wald
// inference, conditional survival prediction, censoring-aware residual
// diagnostics, and a simulation oracle.

#include "haft/errors.hpp"
#include "haft/fit.hpp"
#include "haft/inference.hpp"
#include "haft/io.hpp"
#include "haft/model.hpp"
#include "haft/numkernel.hpp"
#include "haft/predict.hpp"
#include "haft/residuals.hpp"
#include "haft/rng.hpp"
#include "haft/simulate.hpp"

#endif  // HAFT_HAFT_HPP
