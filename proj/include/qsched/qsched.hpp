#pragma once

#include "qsched/config.hpp"
#include "qsched/mac_sched.hpp"
#include "qsched/metrics.hpp"
#include "qsched/mobility.hpp"
#include "qsched/output.hpp"
#include "qsched/scenario.hpp"
#include "qsched/sim_core.hpp"
#include "qsched/traffic.hpp"
