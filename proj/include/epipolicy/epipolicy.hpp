#pragma once

#include "cost.hpp"
#include "errors.hpp"
#include "game.hpp"
#include "optimizer.hpp"
#include "policy.hpp"
#include "run.hpp"
#include "scenario.hpp"
#include "sir.hpp"
