#pragma once

#include "vhslice/agent.hpp"
#include "vhslice/channel.hpp"
#include "vhslice/common.hpp"
#include "vhslice/config.hpp"
#include "vhslice/csv.hpp"
#include "vhslice/experiment.hpp"
#include "vhslice/nn.hpp"
#include "vhslice/plot.hpp"
#include "vhslice/ran.hpp"
#include "vhslice/reward.hpp"
#include "vhslice/scheduler.hpp"
#include "vhslice/traffic.hpp"
#include "vhslice/world.hpp"
