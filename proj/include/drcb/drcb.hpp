#pragma once

#include "drcb/checkpoint.hpp"
#include "drcb/config.hpp"
#include "drcb/datagen.hpp"
#include "drcb/diffusion.hpp"
#include "drcb/evaluate.hpp"
#include "drcb/fixtures.hpp"
#include "drcb/frechet.hpp"
#include "drcb/gradcheck.hpp"
#include "drcb/image.hpp"
#include "drcb/io.hpp"
#include "drcb/metrics.hpp"
#include "drcb/nn.hpp"
#include "drcb/optim.hpp"
#include "drcb/resnet.hpp"
#include "drcb/rng.hpp"
#include "drcb/schedule.hpp"
#include "drcb/scores.hpp"
#include "drcb/svg.hpp"
#include "drcb/tensor.hpp"
#include "drcb/unet.hpp"
