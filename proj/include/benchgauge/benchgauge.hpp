#pragma once

#include "benchgauge/csv.hpp"
#include "benchgauge/dataio.hpp"
#include "benchgauge/error.hpp"
#include "benchgauge/lint.hpp"
#include "benchgauge/loso.hpp"
#include "benchgauge/metrics.hpp"
#include "benchgauge/parallel.hpp"
#include "benchgauge/rankaudit.hpp"
#include "benchgauge/reflearn.hpp"
#include "benchgauge/report.hpp"
#include "benchgauge/rng.hpp"
#include "benchgauge/stats.hpp"
#include "benchgauge/stress.hpp"
#include "benchgauge/sweep.hpp"
#include "benchgauge/transfer.hpp"
