#pragma once

#include "pacmeta/artifact.hpp"
#include "pacmeta/audit.hpp"
#include "pacmeta/bounds.hpp"
#include "pacmeta/commands.hpp"
#include "pacmeta/config.hpp"
#include "pacmeta/csv.hpp"
#include "pacmeta/diff.hpp"
#include "pacmeta/env.hpp"
#include "pacmeta/error.hpp"
#include "pacmeta/gauss.hpp"
#include "pacmeta/metalearn.hpp"
#include "pacmeta/model.hpp"
#include "pacmeta/objectives.hpp"
#include "pacmeta/optim.hpp"
#include "pacmeta/parallel.hpp"
#include "pacmeta/prior_mean.hpp"
#include "pacmeta/rng.hpp"
