#pragma once

#include "crosearch/error.hpp"
#include "crosearch/text.hpp"
#include "crosearch/protocol.hpp"
#include "crosearch/corpus.hpp"
#include "crosearch/backends.hpp"
#include "crosearch/knowledge.hpp"
#include "crosearch/metrics.hpp"
#include "crosearch/retrieval_loop.hpp"
#include "crosearch/dataset.hpp"
#include "crosearch/policy.hpp"
#include "crosearch/toy_agent.hpp"
#include "crosearch/clpo.hpp"
#include "crosearch/synthetic.hpp"
#include "crosearch/eval.hpp"
#include "crosearch/config.hpp"
