#pragma once

#include "flowsearch/csv.hpp"
#include "flowsearch/default_space.hpp"
#include "flowsearch/desk.hpp"
#include "flowsearch/errors.hpp"
#include "flowsearch/eval_record.hpp"
#include "flowsearch/experiments.hpp"
#include "flowsearch/external.hpp"
#include "flowsearch/harness.hpp"
#include "flowsearch/motpe.hpp"
#include "flowsearch/pareto.hpp"
#include "flowsearch/pruner.hpp"
#include "flowsearch/report.hpp"
#include "flowsearch/rng.hpp"
#include "flowsearch/seeding.hpp"
#include "flowsearch/sim.hpp"
#include "flowsearch/space.hpp"
#include "flowsearch/space_io.hpp"
#include "flowsearch/study.hpp"
