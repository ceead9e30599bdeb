#pragma once

#include "irk/block2x2.hpp"
#include "irk/dae.hpp"
#include "irk/dense.hpp"
#include "irk/errors.hpp"
#include "irk/experiments.hpp"
#include "irk/io.hpp"
#include "irk/krylov.hpp"
#include "irk/nonlinear.hpp"
#include "irk/problems.hpp"
#include "irk/sparse.hpp"
#include "irk/stage_solver.hpp"
#include "irk/tableau.hpp"
