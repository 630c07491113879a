#pragma once

#include "edgemix/autodiff.hpp"
#include "edgemix/checkpoint.hpp"
#include "edgemix/config.hpp"
#include "edgemix/decoders.hpp"
#include "edgemix/encoder.hpp"
#include "edgemix/error.hpp"
#include "edgemix/eval.hpp"
#include "edgemix/gradcheck.hpp"
#include "edgemix/graph.hpp"
#include "edgemix/interpret.hpp"
#include "edgemix/io.hpp"
#include "edgemix/latent.hpp"
#include "edgemix/matrix.hpp"
#include "edgemix/model.hpp"
#include "edgemix/model_check.hpp"
#include "edgemix/optimizer.hpp"
#include "edgemix/parameters.hpp"
#include "edgemix/pca.hpp"
#include "edgemix/rng.hpp"
#include "edgemix/sampling.hpp"
#include "edgemix/sweep.hpp"
#include "edgemix/synth.hpp"
#include "edgemix/trainer.hpp"
