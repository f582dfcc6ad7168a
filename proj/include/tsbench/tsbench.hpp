// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tsbench/config.hpp"
#include "tsbench/dataset.hpp"
#include "tsbench/errors.hpp"
#include "tsbench/heterogeneity.hpp"
#include "tsbench/matrix.hpp"
#include "tsbench/metrics.hpp"
#include "tsbench/models.hpp"
#include "tsbench/preprocess.hpp"
#include "tsbench/report.hpp"
#include "tsbench/runner.hpp"
