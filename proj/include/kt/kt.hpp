#pragma once

#include "kt/analysis.hpp"
#include "kt/checkpoint.hpp"
#include "kt/diffcore.hpp"
#include "kt/dkt.hpp"
#include "kt/dkvmn.hpp"
#include "kt/encoding.hpp"
#include "kt/mann.hpp"
#include "kt/metrics.hpp"
#include "kt/model.hpp"
#include "kt/synthgen.hpp"
#include "kt/trainer.hpp"
