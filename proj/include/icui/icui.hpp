#pragma once

#include "icui/common.hpp"
#include "icui/data_model.hpp"
#include "icui/tree.hpp"
#include "icui/forest.hpp"
#include "icui/boost.hpp"
#include "icui/attribution.hpp"
#include "icui/cluster_importance.hpp"
#include "icui/impute.hpp"
#include "icui/evaluate.hpp"
#include "icui/model_io.hpp"
#include "icui/synth.hpp"
#include "icui/report.hpp"
#include "icui/config.hpp"
#include "icui/pipeline.hpp"
