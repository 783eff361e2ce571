#pragma once

#include "offstream/bench.hpp"
#include "offstream/buffer_pool.hpp"
#include "offstream/core.hpp"
#include "offstream/device.hpp"
#include "offstream/model.hpp"
#include "offstream/scheduler.hpp"
#include "offstream/sha1.hpp"
#include "offstream/workloads.hpp"
