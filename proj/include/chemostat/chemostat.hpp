#pragma once

#include "chemostat/exprfn.hpp"
#include "chemostat/model.hpp"
#include "chemostat/equilibrium.hpp"
#include "chemostat/transforms.hpp"
#include "chemostat/controllers.hpp"
#include "chemostat/trajectory.hpp"
#include "chemostat/lyapunov.hpp"
#include "chemostat/analysis.hpp"
#include "chemostat/solver.hpp"
#include "chemostat/scenario.hpp"
#include "chemostat/run.hpp"
