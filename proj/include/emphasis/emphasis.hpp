#pragma once

#include "emphasis/augment.hpp"
#include "emphasis/checkpoint.hpp"
#include "emphasis/corpus.hpp"
#include "emphasis/errors.hpp"
#include "emphasis/evalx.hpp"
#include "emphasis/features.hpp"
#include "emphasis/harness.hpp"
#include "emphasis/model.hpp"
#include "emphasis/objectives.hpp"
#include "emphasis/optimizer.hpp"
#include "emphasis/rng.hpp"
#include "emphasis/subword.hpp"
#include "emphasis/synthetic.hpp"
#include "emphasis/utf8.hpp"
