#pragma once

#include "edp/errors.hpp"
#include "edp/grid.hpp"
#include "edp/trajectory.hpp"
#include "edp/sstp.hpp"
#include "edp/ingest.hpp"
#include "edp/model.hpp"
#include "edp/persist.hpp"
#include "edp/update.hpp"
#include "edp/predict.hpp"
#include "edp/baseline.hpp"
#include "edp/evaluate.hpp"
