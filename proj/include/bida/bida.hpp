// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bida/bidastereo.hpp"
#include "bida/conv.hpp"
#include "bida/correlation.hpp"
#include "bida/error.hpp"
#include "bida/field.hpp"
#include "bida/flow_provider.hpp"
#include "bida/gradcheck.hpp"
#include "bida/io/flo.hpp"
#include "bida/io/manifest.hpp"
#include "bida/io/pfm.hpp"
#include "bida/io/ppm.hpp"
#include "bida/io/report.hpp"
#include "bida/io/scene.hpp"
#include "bida/io/weights.hpp"
#include "bida/losses.hpp"
#include "bida/metrics.hpp"
#include "bida/parallel.hpp"
#include "bida/random.hpp"
#include "bida/ssim.hpp"
#include "bida/stabilizer.hpp"
#include "bida/stabilizer_check.hpp"
#include "bida/synthgen.hpp"
#include "bida/tensor.hpp"
#include "bida/train.hpp"
#include "bida/warp.hpp"
