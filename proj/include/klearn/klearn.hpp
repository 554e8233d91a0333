#pragma once

#include "klearn/error.hpp"
#include "klearn/distribution.hpp"
#include "klearn/corpus.hpp"
#include "klearn/scoring.hpp"
#include "klearn/pairs.hpp"
#include "klearn/infer_closed.hpp"
#include "klearn/infer_grad.hpp"
#include "klearn/eval.hpp"
#include "klearn/analysis.hpp"
#include "klearn/synth.hpp"
#include "klearn/sentence.hpp"
#include "klearn/summarizer.hpp"
