#pragma once

#include "hoikit/alignment.hpp"
#include "hoikit/annotations.hpp"
#include "hoikit/checkpoint.hpp"
#include "hoikit/config.hpp"
#include "hoikit/core/grad_check.hpp"
#include "hoikit/core/nn.hpp"
#include "hoikit/core/ops.hpp"
#include "hoikit/core/rng.hpp"
#include "hoikit/core/tensor.hpp"
#include "hoikit/dataset.hpp"
#include "hoikit/detection.hpp"
#include "hoikit/errors.hpp"
#include "hoikit/evaluation.hpp"
#include "hoikit/geometry.hpp"
#include "hoikit/model.hpp"
#include "hoikit/probe.hpp"
#include "hoikit/records.hpp"
#include "hoikit/relation_encoder.hpp"
#include "hoikit/report.hpp"
#include "hoikit/text_knowledge.hpp"
#include "hoikit/train.hpp"
