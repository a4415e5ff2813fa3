#pragma once

#include "rlab/bounds.hpp"
#include "rlab/coupling.hpp"
#include "rlab/error.hpp"
#include "rlab/exactdist.hpp"
#include "rlab/mc.hpp"
#include "rlab/oracle.hpp"
#include "rlab/rng.hpp"
#include "rlab/seqgen.hpp"
#include "rlab/stats.hpp"
#include "rlab/verify.hpp"
