// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "csr/errors.hpp"
#include "csr/context.hpp"
#include "csr/cost_model.hpp"
#include "csr/backend.hpp"
#include "csr/event_log.hpp"
#include "csr/asr_scheduler.hpp"
#include "csr/request_router.hpp"
#include "csr/serialization.hpp"
#include "csr/calibration.hpp"
#include "csr/sim/scenario.hpp"
#include "csr/sim/trace.hpp"
#include "csr/sim/runner.hpp"
#include "csr/sim/scheduler_sim.hpp"
#include "csr/sim/sweep.hpp"
#include "csr/sim/feasibility_map.hpp"
