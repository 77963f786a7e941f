#pragma once

#include "ltpsid/error.hpp"
#include "ltpsid/linalg.hpp"
#include "ltpsid/model.hpp"
#include "ltpsid/fixtures.hpp"
#include "ltpsid/signal.hpp"
#include "ltpsid/etfe.hpp"
#include "ltpsid/subspace.hpp"
#include "ltpsid/eval.hpp"
#include "ltpsid/io.hpp"
