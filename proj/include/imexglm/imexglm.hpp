#pragma once

// Umbrella header: fixed-step implicit-explicit general linear methods for
// additively and component-partitioned ODEs, index-1 DAEs, and singular
// perturbation problems, plus order/stability validation and convergence
// measurement tooling.

#include "imexglm/analysis.hpp"
#include "imexglm/common.hpp"
#include "imexglm/dae.hpp"
#include "imexglm/problems.hpp"
#include "imexglm/rational.hpp"
#include "imexglm/report_io.hpp"
#include "imexglm/starting.hpp"
#include "imexglm/stepper.hpp"
#include "imexglm/tableau.hpp"
