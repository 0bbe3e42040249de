#pragma once

#include "scrm/error.hpp"
#include "scrm/linalg.hpp"
#include "scrm/session_ingest.hpp"
#include "scrm/relation_graphs.hpp"
#include "scrm/model.hpp"
#include "scrm/losses.hpp"
#include "scrm/backward.hpp"
#include "scrm/optimizer.hpp"
#include "scrm/evaluation.hpp"
#include "scrm/training.hpp"
#include "scrm/checkpoint.hpp"
#include "scrm/config.hpp"
#include "scrm/synth.hpp"
#include "scrm/commands.hpp"
