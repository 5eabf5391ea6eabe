#pragma once

#include "brownian.hpp"
#include "errors.hpp"
#include "measure.hpp"
#include "model.hpp"
#include "newton.hpp"
#include "parallel.hpp"
#include "particles.hpp"
#include "schemes.hpp"
#include "simulator.hpp"
#include "experiments/commands.hpp"
#include "experiments/config.hpp"
#include "experiments/fit.hpp"
#include "experiments/results.hpp"
