#pragma once

#include "g2n/config.hpp"
#include "g2n/envs.hpp"
#include "g2n/error.hpp"
#include "g2n/genome.hpp"
#include "g2n/gradcheck.hpp"
#include "g2n/gradient_checks.hpp"
#include "g2n/log.hpp"
#include "g2n/matrix.hpp"
#include "g2n/metrics.hpp"
#include "g2n/model.hpp"
#include "g2n/network.hpp"
#include "g2n/optim.hpp"
#include "g2n/policy.hpp"
#include "g2n/random.hpp"
#include "g2n/rollout.hpp"
#include "g2n/trainer.hpp"
