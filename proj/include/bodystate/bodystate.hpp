#pragma once

#include "bodystate/data_io.hpp"
#include "bodystate/errors.hpp"
#include "bodystate/evaluation.hpp"
#include "bodystate/hmm.hpp"
#include "bodystate/lda.hpp"
#include "bodystate/skeleton.hpp"
#include "bodystate/state_classifier.hpp"
#include "bodystate/synthetic.hpp"
