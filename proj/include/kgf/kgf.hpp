#pragma once

// Convenience umbrella include.

#include "kgf/adam.hpp"
#include "kgf/attention.hpp"
#include "kgf/checkpoint.hpp"
#include "kgf/common.hpp"
#include "kgf/dataset.hpp"
#include "kgf/embedding.hpp"
#include "kgf/grad_check.hpp"
#include "kgf/metrics.hpp"
#include "kgf/model.hpp"
#include "kgf/ops.hpp"
#include "kgf/reports.hpp"
#include "kgf/schema.hpp"
#include "kgf/synthetic.hpp"
#include "kgf/tensor.hpp"
#include "kgf/train.hpp"
#include "kgf/whatif.hpp"
