#pragma once

#include "convlab/arch.hpp"
#include "convlab/autodiff.hpp"
#include "convlab/checkpoint.hpp"
#include "convlab/corpus_io.hpp"
#include "convlab/features.hpp"
#include "convlab/gradcheck.hpp"
#include "convlab/gradcheck_suite.hpp"
#include "convlab/multilingual.hpp"
#include "convlab/network.hpp"
#include "convlab/ops.hpp"
#include "convlab/optim.hpp"
#include "convlab/sampler.hpp"
#include "convlab/synthetic.hpp"
#include "convlab/tensor.hpp"
#include "convlab/trainer.hpp"
