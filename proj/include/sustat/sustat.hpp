#pragma once

// Umbrella header for the superstatistics toolkit.

#include "sustat/correlation.hpp"
#include "sustat/distributions.hpp"
#include "sustat/errors.hpp"
#include "sustat/ingest.hpp"
#include "sustat/marginal.hpp"
#include "sustat/report.hpp"
#include "sustat/returns.hpp"
#include "sustat/synth.hpp"
#include "sustat/windowing.hpp"
