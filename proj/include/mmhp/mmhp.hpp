#pragma once

#include "mmhp/error.hpp"
#include "mmhp/matexp.hpp"
#include "mmhp/model.hpp"
#include "mmhp/transition.hpp"
#include "mmhp/inference.hpp"
#include "mmhp/em.hpp"
#include "mmhp/decode.hpp"
#include "mmhp/simulate.hpp"
#include "mmhp/gof.hpp"
#include "mmhp/io.hpp"
#include "mmhp/market.hpp"
