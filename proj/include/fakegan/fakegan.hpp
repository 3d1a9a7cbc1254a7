#pragma once

#include "fakegan/array.hpp"
#include "fakegan/autodiff.hpp"
#include "fakegan/checkpoint.hpp"
#include "fakegan/config.hpp"
#include "fakegan/discriminator.hpp"
#include "fakegan/errors.hpp"
#include "fakegan/generator.hpp"
#include "fakegan/gradcheck.hpp"
#include "fakegan/gradcheck_suite.hpp"
#include "fakegan/kernels.hpp"
#include "fakegan/metrics.hpp"
#include "fakegan/optim.hpp"
#include "fakegan/random.hpp"
#include "fakegan/rollout.hpp"
#include "fakegan/synth.hpp"
#include "fakegan/text.hpp"
#include "fakegan/trainer.hpp"
