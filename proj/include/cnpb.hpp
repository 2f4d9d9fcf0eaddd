#pragma once

#include "cnpb/config.hpp"
#include "cnpb/contraction.hpp"
#include "cnpb/density.hpp"
#include "cnpb/ergodic.hpp"
#include "cnpb/error.hpp"
#include "cnpb/experiments.hpp"
#include "cnpb/fokker_planck.hpp"
#include "cnpb/gibbs.hpp"
#include "cnpb/noise.hpp"
#include "cnpb/oracle_ou.hpp"
#include "cnpb/potential.hpp"
#include "cnpb/profile.hpp"
#include "cnpb/random.hpp"
#include "cnpb/sde.hpp"
