#pragma once

#include "nifa/aggregator.hpp"
#include "nifa/candidates.hpp"
#include "nifa/classifier.hpp"
#include "nifa/common.hpp"
#include "nifa/csv.hpp"
#include "nifa/kde1d.hpp"
#include "nifa/linmodel.hpp"
#include "nifa/numeric.hpp"
#include "nifa/parallel.hpp"
#include "nifa/rng.hpp"
#include "nifa/serialize.hpp"
#include "nifa/simbench.hpp"
