#pragma once

#include "automaton.hpp"
#include "core.hpp"
#include "graph.hpp"
#include "metrics.hpp"
#include "oisf.hpp"
#include "pipeline.hpp"
#include "priors.hpp"
#include "queries.hpp"
