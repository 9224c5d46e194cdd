#pragma once

#include "relkit/adam.hpp"
#include "relkit/autodiff.hpp"
#include "relkit/checkpoint.hpp"
#include "relkit/config.hpp"
#include "relkit/corpus.hpp"
#include "relkit/decode.hpp"
#include "relkit/encoder.hpp"
#include "relkit/gradcheck.hpp"
#include "relkit/loss.hpp"
#include "relkit/metrics.hpp"
#include "relkit/model.hpp"
#include "relkit/relation_head.hpp"
#include "relkit/rng.hpp"
#include "relkit/tensor.hpp"
#include "relkit/train.hpp"
#include "relkit/vocab.hpp"
