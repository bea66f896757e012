#pragma once

#include "perfsig/detect.hpp"
#include "perfsig/error.hpp"
#include "perfsig/ingest.hpp"
#include "perfsig/profile.hpp"
#include "perfsig/report.hpp"
#include "perfsig/signature.hpp"
#include "perfsig/simulate.hpp"
#include "perfsig/time.hpp"
