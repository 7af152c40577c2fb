#pragma once

#include "mtorl/action.hpp"
#include "mtorl/bench/awcci.hpp"
#include "mtorl/emt/engine.hpp"
#include "mtorl/emt/trace.hpp"
#include "mtorl/harness/evaluate.hpp"
#include "mtorl/nn/adam.hpp"
#include "mtorl/nn/checkpoint.hpp"
#include "mtorl/nn/ops.hpp"
#include "mtorl/policy/policy.hpp"
#include "mtorl/ppo/trainer.hpp"
