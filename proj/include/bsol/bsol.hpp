#pragma once

#include "bsol/connection.hpp"
#include "bsol/control.hpp"
#include "bsol/diffusion.hpp"
#include "bsol/errors.hpp"
#include "bsol/expr.hpp"
#include "bsol/fundamental.hpp"
#include "bsol/montecarlo.hpp"
#include "bsol/numeric.hpp"
#include "bsol/payoff.hpp"
#include "bsol/ratio.hpp"
#include "bsol/resolvent.hpp"
#include "bsol/stopping.hpp"
#include "bsol/values.hpp"
