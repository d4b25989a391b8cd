#pragma once

#include "synthbound/bound.hpp"
#include "synthbound/common.hpp"
#include "synthbound/config.hpp"
#include "synthbound/data.hpp"
#include "synthbound/experiment.hpp"
#include "synthbound/loss.hpp"
#include "synthbound/model.hpp"
#include "synthbound/partition.hpp"
#include "synthbound/train.hpp"
