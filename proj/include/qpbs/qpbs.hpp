#pragma once

#include "qpbs/error.hpp"
#include "qpbs/roots.hpp"
#include "qpbs/bath_core.hpp"
#include "qpbs/single_excitation.hpp"
#include "qpbs/two_qe_pair.hpp"
#include "qpbs/array_pair.hpp"
#include "qpbs/triplon.hpp"
#include "qpbs/ed_oracle.hpp"
#include "qpbs/mps_ground_state.hpp"
#include "qpbs/checks.hpp"
#include "qpbs/sweep.hpp"
