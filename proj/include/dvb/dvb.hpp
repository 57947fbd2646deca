#pragma once

#include "dvb/core.hpp"
#include "dvb/special_functions.hpp"
#include "dvb/expfam.hpp"
#include "dvb/gmm.hpp"
#include "dvb/network.hpp"
#include "dvb/assignment.hpp"
#include "dvb/algorithms.hpp"
#include "dvb/harness/dataset.hpp"
#include "dvb/harness/synthetic.hpp"
#include "dvb/harness/metrics.hpp"
#include "dvb/harness/experiment.hpp"
